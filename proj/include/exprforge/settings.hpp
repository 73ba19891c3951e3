#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <vector>

#include "exprforge/backends.hpp"
#include "exprforge/canny.hpp"
#include "exprforge/diff_analyzer.hpp"
#include "exprforge/edit_pipeline.hpp"
#include "exprforge/prompting.hpp"

namespace exprforge {

struct BackendSettings {
  BackendKind kind = BackendKind::stub;
  StubMode stub_mode = StubMode::procedural;
  int stub_edge_width = 2;
  HttpBackendConfig http;
  std::vector<std::chrono::milliseconds> timing_delays{std::chrono::milliseconds(100)};
};

// Service-wide configuration, persisted as a single JSON file.
struct Settings {
  PromptTemplate prompt;
  HyperParams defaults;
  BackendSettings backend;
  std::vector<LoRAConfig> loras;  // registry, referenced by name from edit requests
  int diff_threshold = kDefaultDiffThreshold;
  int crop_padding = 64;
  CannyParams canny;
  std::size_t job_cap = 100;
};

nlohmann::json settings_to_json(const Settings& s);
// Overlays the fields present in `j` on `base` and validates the result.
Settings settings_from_json(const nlohmann::json& j, const Settings& base = {});
void validate_settings(const Settings& s);

// JSON merge-patch on top of `current`; throws without side effects when the
// patched settings are invalid.
Settings apply_settings_patch(const Settings& current, const nlohmann::json& patch);

Settings load_settings(const std::filesystem::path& path);
// Write-to-temp then rename, so readers never observe a partial file.
void save_settings(const std::filesystem::path& path, const Settings& s);

std::shared_ptr<GenerationBackend> make_backend(const BackendSettings& s);

}  // namespace exprforge
