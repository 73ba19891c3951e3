#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exprforge/canny.hpp"
#include "exprforge/image.hpp"
#include "exprforge/prompting.hpp"

namespace exprforge {

class GenerationBackend;

struct HyperParams {
  double denoising_strength = 1.0;  // (0, 1]
  double controlnet_steps = 0.5;    // [0, 1], fraction of sampling steps under edge control
  int sampling_steps = 30;          // >= 1
  double cfg_scale = 7.0;           // > 0
  std::optional<std::uint64_t> seed;  // nullopt = random
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// Throws ParamOutOfRange(name) on the first out-of-range field.
void validate_params(const HyperParams& params);

struct EditRequest {
  RasterImage image;
  SelectionMask mask;
  std::string prompt;  // may be empty (transform-only repair)
  std::string negative_prompt;
  HyperParams params;
  std::vector<LoRAConfig> loras;
  std::vector<Point> context_dots;
};

struct LayerMetadata {
  std::uint64_t seed = 0;
  std::string backend_id;
  double latency_ms = 0.0;
  std::string request_hash;  // 16 hex digits
};

// Full-frame layer at origin (0,0); alpha is 255 exactly on selected pixels.
struct EditLayer {
  RasterImage pixels;
  LayerMetadata metadata;
};

struct EditResult {
  EditLayer layer;
  RasterImage composited_preview;
};

struct PipelineOptions {
  int crop_padding = 64;
  CannyParams canny;
  // Post-hoc deadline on the backend call; exceeding it raises Timeout.
  std::optional<std::chrono::milliseconds> timeout;
};

// Dimension match, non-empty selection, hyperparameter and LoRA ranges.
void validate_request(const EditRequest& req);

struct CropResult {
  RasterImage image;
  SelectionMask mask;
  Rect box;
};

// Tight box of the selection grown by `padding` and clamped to the image.
Rect selection_box(const SelectionMask& mask, int padding);
CropResult crop_to_selection(const RasterImage& image, const SelectionMask& mask, int padding);

// Scales the selected content about the selection centroid and translates it,
// nearest-neighbour. Selected pixels whose source falls outside the selection
// become `fill`; unselected pixels are untouched.
RasterImage apply_region_transform(const RasterImage& image, const SelectionMask& mask, double scale, double dx,
                                   double dy, Rgba fill = kWhite);

// out = layer where layer alpha is 255, base elsewhere.
RasterImage composite(const RasterImage& base, const EditLayer& layer);
RasterImage composite(const RasterImage& base, const RasterImage& layer_pixels);

// Applies LoRA step/cfg overrides; the first LoRA carrying an override wins.
HyperParams effective_params(const HyperParams& params, const std::vector<LoRAConfig>& loras);

// FNV-1a over every request field, as 16 hex digits.
std::string request_hash(const EditRequest& req);

EditResult run_edit(const EditRequest& req, GenerationBackend& backend, const PipelineOptions& options = {});

// One step of an iterative session; applied to the current image.
struct EditDelta {
  SelectionMask mask;
  std::string prompt;
  std::string negative_prompt;
  HyperParams params;
  std::vector<LoRAConfig> loras;
  std::vector<Point> context_dots;
};

// Returns the input followed by the image after every step (size = steps + 1).
// Errors are rethrown with the failing step index prefixed to the message.
std::vector<RasterImage> iterate_edits(const RasterImage& image, const std::vector<EditDelta>& steps,
                                       GenerationBackend& backend, const PipelineOptions& options = {});

}  // namespace exprforge
