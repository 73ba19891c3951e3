#include "exprforge/edit_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "exprforge/backends.hpp"
#include "exprforge/error.hpp"

namespace exprforge {

void validate_params(const HyperParams& p) {
  if (!(p.denoising_strength > 0.0 && p.denoising_strength <= 1.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "denoising_strength must be in (0, 1]", "denoising_strength");
  }
  if (!(p.controlnet_steps >= 0.0 && p.controlnet_steps <= 1.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "controlnet_steps must be in [0, 1]", "controlnet_steps");
  }
  if (p.sampling_steps < 1) {
    throw Error(ErrorCode::ParamOutOfRange, "sampling_steps must be >= 1", "sampling_steps");
  }
  if (!(p.cfg_scale > 0.0) || !std::isfinite(p.cfg_scale)) {
    throw Error(ErrorCode::ParamOutOfRange, "cfg_scale must be > 0", "cfg_scale");
  }
}

void validate_request(const EditRequest& req) {
  if (req.image.empty()) throw Error(ErrorCode::InvalidImage, "request image is empty", "image");
  if (req.mask.width() != req.image.width() || req.mask.height() != req.image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask is " + std::to_string(req.mask.width()) + "x" +
                                                  std::to_string(req.mask.height()) + ", image is " +
                                                  std::to_string(req.image.width()) + "x" +
                                                  std::to_string(req.image.height()),
                "mask");
  }
  if (!req.mask.any()) throw Error(ErrorCode::EmptySelection, "selection mask is empty", "mask");
  validate_params(req.params);
  for (const auto& lora : req.loras) validate_lora(lora);
}

Rect selection_box(const SelectionMask& mask, int padding) {
  const Rect tight = bounding_box(mask);
  if (tight.width == 0) throw Error(ErrorCode::EmptySelection, "selection mask is empty", "mask");
  padding = std::max(padding, 0);
  const int x0 = std::max(tight.x - padding, 0);
  const int y0 = std::max(tight.y - padding, 0);
  const int x1 = std::min(tight.x + tight.width + padding, mask.width());
  const int y1 = std::min(tight.y + tight.height + padding, mask.height());
  return {x0, y0, x1 - x0, y1 - y0};
}

CropResult crop_to_selection(const RasterImage& image, const SelectionMask& mask, int padding) {
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask and image dimensions differ", "mask");
  }
  const Rect box = selection_box(mask, padding);
  return {crop(image, box), crop(mask, box), box};
}

RasterImage apply_region_transform(const RasterImage& image, const SelectionMask& mask, double scale, double dx,
                                   double dy, Rgba fill) {
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask and image dimensions differ", "mask");
  }
  if (!(scale > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "scale must be > 0", "scale");
  double sum_x = 0.0, sum_y = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      sum_x += x;
      sum_y += y;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptySelection, "selection mask is empty", "mask");
  const double cx = sum_x / static_cast<double>(n);
  const double cy = sum_y / static_cast<double>(n);

  RasterImage out = image;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      // Inverse map: destination -> source.
      const double sx = cx + (x - dx - cx) / scale;
      const double sy = cy + (y - dy - cy) / scale;
      const int ix = static_cast<int>(std::floor(sx + 0.5));
      const int iy = static_cast<int>(std::floor(sy + 0.5));
      out.set(x, y, mask.selected(ix, iy) ? image.at(ix, iy) : fill);
    }
  }
  return out;
}

RasterImage composite(const RasterImage& base, const RasterImage& layer) {
  if (base.width() != layer.width() || base.height() != layer.height()) {
    throw Error(ErrorCode::DimensionMismatch, "layer and base dimensions differ", "layer");
  }
  RasterImage out = base;
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      const auto* p = layer.pixel(x, y);
      if (p[3] == 255) std::copy(p, p + 4, out.pixel(x, y));
    }
  }
  return out;
}

RasterImage composite(const RasterImage& base, const EditLayer& layer) { return composite(base, layer.pixels); }

HyperParams effective_params(const HyperParams& params, const std::vector<LoRAConfig>& loras) {
  HyperParams out = params;
  for (const auto& l : loras) {
    if (l.step_override) {
      out.sampling_steps = *l.step_override;
      break;
    }
  }
  for (const auto& l : loras) {
    if (l.cfg_override) {
      out.cfg_scale = *l.cfg_override;
      break;
    }
  }
  return out;
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void text(std::string_view s) {
    bytes(s.data(), s.size());
    bytes("\0", 1);
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(v));
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::uint64_t random_seed() {
  std::random_device rd;
  return rd();
}

}  // namespace

std::string request_hash(const EditRequest& req) {
  Fnv1a h;
  h.value(req.image.width());
  h.value(req.image.height());
  h.bytes(req.image.bytes().data(), req.image.bytes().size());
  h.value(req.mask.width());
  h.value(req.mask.height());
  h.bytes(req.mask.bits().data(), req.mask.bits().size());
  h.text(req.prompt);
  h.text(req.negative_prompt);
  const auto& p = req.params;
  h.value(p.denoising_strength);
  h.value(p.controlnet_steps);
  h.value(p.sampling_steps);
  h.value(p.cfg_scale);
  h.value(p.seed.has_value());
  h.value(p.seed.value_or(0));
  for (const auto& l : req.loras) {
    h.text(l.name);
    for (const auto& w : l.trigger_words) h.text(w);
    h.value(l.weight);
    h.value(l.step_override.value_or(0));
    h.value(l.cfg_override.value_or(0.0));
  }
  for (const auto& d : req.context_dots) {
    h.value(d.x);
    h.value(d.y);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.digest()));
  return buf;
}

EditResult run_edit(const EditRequest& req, GenerationBackend& backend, const PipelineOptions& options) {
  validate_request(req);
  const auto start = std::chrono::steady_clock::now();

  HyperParams params = effective_params(req.params, req.loras);
  const std::uint64_t seed = params.seed ? *params.seed : random_seed();
  params.seed = seed;

  CropResult crop = crop_to_selection(req.image, req.mask, options.crop_padding);
  GenerationInput input;
  input.edge_map = extract_canny(crop.image, options.canny);
  input.image = std::move(crop.image);
  input.mask = std::move(crop.mask);
  input.prompt = inject_lora_triggers(req.prompt, req.loras);
  input.negative_prompt = req.negative_prompt;
  input.params = params;
  input.context_dots = req.context_dots;

  RasterImage generated;
  try {
    generated = backend.generate(input);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("backend failed: ") + e.what());
  }
  if (generated.width() != input.image.width() || generated.height() != input.image.height()) {
    throw Error(ErrorCode::DimensionMismatchFromBackend,
                "backend returned " + std::to_string(generated.width()) + "x" + std::to_string(generated.height()) +
                    " for a " + std::to_string(input.image.width()) + "x" + std::to_string(input.image.height()) +
                    " input");
  }

  EditLayer layer;
  layer.pixels = RasterImage(req.image.width(), req.image.height(), kTransparent);
  const Rect& box = crop.box;
  for (int y = 0; y < box.height; ++y) {
    for (int x = 0; x < box.width; ++x) {
      if (!input.mask.at(x, y)) continue;
      const auto* src = generated.pixel(x, y);
      layer.pixels.set(box.x + x, box.y + y, {src[0], src[1], src[2], 255});
    }
  }

  const auto elapsed = std::chrono::steady_clock::now() - start;
  if (options.timeout && elapsed > *options.timeout) {
    throw Error(ErrorCode::Timeout, "edit exceeded its deadline of " + std::to_string(options.timeout->count()) + " ms");
  }
  layer.metadata.seed = seed;
  layer.metadata.backend_id = backend.descriptor().id;
  layer.metadata.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  layer.metadata.request_hash = request_hash(req);

  EditResult result;
  result.composited_preview = composite(req.image, layer);
  result.layer = std::move(layer);
  return result;
}

std::vector<RasterImage> iterate_edits(const RasterImage& image, const std::vector<EditDelta>& steps,
                                       GenerationBackend& backend, const PipelineOptions& options) {
  std::vector<RasterImage> snapshots{image};
  snapshots.reserve(steps.size() + 1);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& d = steps[i];
    EditRequest req{snapshots.back(), d.mask, d.prompt, d.negative_prompt, d.params, d.loras, d.context_dots};
    try {
      snapshots.push_back(run_edit(req, backend, options).composited_preview);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(i + 1) + ": " + e.what(), e.subject());
    }
  }
  return snapshots;
}

}  // namespace exprforge
