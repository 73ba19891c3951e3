#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "exprforge/edit_pipeline.hpp"
#include "exprforge/image.hpp"

namespace exprforge {

enum class BackendKind { stub, http, timing };

std::string_view to_string(BackendKind kind);

struct BackendDescriptor {
  std::string id;
  BackendKind kind = BackendKind::stub;
};

// Everything a backend sees for one call. Images are the crop around the
// selection; `params.seed` is always resolved by the pipeline.
struct GenerationInput {
  RasterImage image;
  SelectionMask mask;
  GrayImage edge_map;
  std::string prompt;
  std::string negative_prompt;
  HyperParams params;
  std::vector<Point> context_dots;
};

// Returns a raster with the dimensions of input.image. Implementations may
// write anywhere; the pipeline discards everything outside the selection.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual RasterImage generate(const GenerationInput& input) = 0;
  virtual BackendDescriptor descriptor() const = 0;
};

// ---------------------------------------------------------------------------

enum class StubMode {
  procedural,   // seed-derived hue rotation + 3x3 box smoothing inside the selection
  identity,     // returns the input unchanged
  global_noise, // procedural edit plus noise on every pixel, selected or not
  edge_noise,   // identity except for noise in a band inside the selection boundary
};

std::string_view to_string(StubMode mode);
StubMode parse_stub_mode(std::string_view name);

class StubBackend final : public GenerationBackend {
 public:
  explicit StubBackend(StubMode mode = StubMode::procedural, int edge_width = 2, int noise_amplitude = 12);

  RasterImage generate(const GenerationInput& input) override;
  BackendDescriptor descriptor() const override;

  StubMode mode() const noexcept { return mode_; }

 private:
  StubMode mode_;
  int edge_width_;
  int noise_amplitude_;
};

// Selected pixels whose Chebyshev distance to an unselected pixel is <= width.
// Pixels beyond the raster border do not count as unselected.
SelectionMask boundary_band(const SelectionMask& mask, int width);

// ---------------------------------------------------------------------------

struct HttpBackendConfig {
  std::string base_url;                 // http://host:port
  std::string endpoint_path = "/generate";
  std::chrono::milliseconds timeout{120'000};
  std::string model_name;
  std::string controlnet_model;
  std::map<std::string, std::string> extra_headers;
  bool concurrent = false;              // default: one request in flight per endpoint
};

// Reads EXPRFORGE_BACKEND_URL / EXPRFORGE_BACKEND_TIMEOUT (seconds) over `base`.
HttpBackendConfig http_config_from_env(HttpBackendConfig base = {});

// JSON request body for one call (base64 PNG images); exposed for tests and tooling.
std::string build_http_request_body(const HttpBackendConfig& config, const GenerationInput& input);

// Decodes the first image of a response body {"images": ["<base64 png>", ...]}.
RasterImage parse_http_response_body(const std::string& body);

class HttpBackend final : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  RasterImage generate(const GenerationInput& input) override;
  BackendDescriptor descriptor() const override;

  const HttpBackendConfig& config() const noexcept { return config_; }

 private:
  HttpBackendConfig config_;
  std::mutex call_mutex_;
};

// ---------------------------------------------------------------------------

// Sleeps a scheduled delay per call (cycling through the profile), then acts
// as the identity backend. Used to validate the latency harness.
class TimingBackend final : public GenerationBackend {
 public:
  explicit TimingBackend(std::vector<std::chrono::milliseconds> profile);
  explicit TimingBackend(std::chrono::milliseconds constant) : TimingBackend(std::vector{constant}) {}

  RasterImage generate(const GenerationInput& input) override;
  BackendDescriptor descriptor() const override;

  // Delays actually scheduled, in call order.
  std::vector<std::chrono::milliseconds> scheduled() const;
  void reset();

 private:
  std::vector<std::chrono::milliseconds> profile_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::vector<std::chrono::milliseconds> log_;
};

}  // namespace exprforge
