#include "exprforge/backends.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "exprforge/base64.hpp"
#include "exprforge/error.hpp"
#include "exprforge/png_io.hpp"

namespace exprforge {

using json = nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::stub: return "stub";
    case BackendKind::http: return "http";
    case BackendKind::timing: return "timing";
  }
  return "stub";
}

std::string_view to_string(StubMode mode) {
  switch (mode) {
    case StubMode::procedural: return "procedural";
    case StubMode::identity: return "identity";
    case StubMode::global_noise: return "global_noise";
    case StubMode::edge_noise: return "edge_noise";
  }
  return "procedural";
}

StubMode parse_stub_mode(std::string_view name) {
  if (name == "procedural") return StubMode::procedural;
  if (name == "identity") return StubMode::identity;
  if (name == "global_noise") return StubMode::global_noise;
  if (name == "edge_noise") return StubMode::edge_noise;
  throw Error(ErrorCode::ParamOutOfRange, "unknown stub mode '" + std::string(name) + "'", "stub_mode");
}

namespace {

// splitmix64
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // Uniform in [-amp, amp] excluding 0.
  int nonzero_offset(int amp) {
    const auto span = static_cast<std::uint64_t>(2 * amp);
    const int v = static_cast<int>(next() % span);  // 0 .. 2amp-1
    return v < amp ? v - amp : v - amp + 1;
  }

 private:
  std::uint64_t state_;
};

std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

RasterImage hue_rotate_selected(const RasterImage& image, const SelectionMask& mask, double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double m[3][3] = {
      {0.213 + c * 0.787 - s * 0.213, 0.715 - c * 0.715 - s * 0.715, 0.072 - c * 0.072 + s * 0.928},
      {0.213 - c * 0.213 + s * 0.143, 0.715 + c * 0.285 + s * 0.140, 0.072 - c * 0.072 - s * 0.283},
      {0.213 - c * 0.213 - s * 0.787, 0.715 - c * 0.715 + s * 0.715, 0.072 + c * 0.928 + s * 0.072},
  };
  // Fixed point so rounding does not depend on libm details beyond the matrix.
  int q[3][3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) q[i][j] = static_cast<int>(std::lround(m[i][j] * 4096.0));
  }
  RasterImage out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const auto* p = image.pixel(x, y);
      auto* o = out.pixel(x, y);
      for (int i = 0; i < 3; ++i) {
        const int v = q[i][0] * p[0] + q[i][1] * p[1] + q[i][2] * p[2];
        o[i] = clamp8((v + 2048) >> 12);
      }
    }
  }
  return out;
}

RasterImage box_smooth_selected(const RasterImage& image, const SelectionMask& mask) {
  RasterImage out = image;
  const int w = image.width(), h = image.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      int sum[3] = {0, 0, 0};
      for (int oy = -1; oy <= 1; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
          const auto* p = image.pixel(std::clamp(x + ox, 0, w - 1), std::clamp(y + oy, 0, h - 1));
          for (int c = 0; c < 3; ++c) sum[c] += p[c];
        }
      }
      auto* o = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) o[c] = static_cast<std::uint8_t>((sum[c] + 4) / 9);
    }
  }
  return out;
}

void add_noise(RasterImage& image, const SelectionMask* only, SplitMix64& rng, int amp) {
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (only != nullptr && !only->at(x, y)) continue;
      auto* p = image.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const int off = rng.nonzero_offset(amp);
        int v = p[c] + off;
        // Reflect at the range ends so every noisy sample really changes.
        if (v < 0 || v > 255) v = p[c] - off;
        p[c] = static_cast<std::uint8_t>(v);
      }
    }
  }
}

}  // namespace

SelectionMask boundary_band(const SelectionMask& mask, int width) {
  SelectionMask band(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      bool near = false;
      for (int oy = -width; oy <= width && !near; ++oy) {
        for (int ox = -width; ox <= width; ++ox) {
          const int nx = x + ox, ny = y + oy;
          if (nx < 0 || ny < 0 || nx >= mask.width() || ny >= mask.height()) continue;
          if (!mask.at(nx, ny)) {
            near = true;
            break;
          }
        }
      }
      band.set(x, y, near);
    }
  }
  return band;
}

StubBackend::StubBackend(StubMode mode, int edge_width, int noise_amplitude)
    : mode_(mode), edge_width_(std::max(edge_width, 1)), noise_amplitude_(std::clamp(noise_amplitude, 1, 64)) {}

BackendDescriptor StubBackend::descriptor() const {
  std::string id = "stub:" + std::string(to_string(mode_));
  if (mode_ == StubMode::edge_noise) id += "(" + std::to_string(edge_width_) + ")";
  return {id, BackendKind::stub};
}

RasterImage StubBackend::generate(const GenerationInput& input) {
  const std::uint64_t seed = input.params.seed.value_or(0);
  switch (mode_) {
    case StubMode::identity:
      return input.image;
    case StubMode::edge_noise: {
      RasterImage out = input.image;
      SplitMix64 rng(seed ^ 0xed9e5eedULL);
      const SelectionMask band = boundary_band(input.mask, edge_width_);
      add_noise(out, &band, rng, noise_amplitude_);
      return out;
    }
    case StubMode::procedural:
    case StubMode::global_noise: {
      SplitMix64 rng(seed);
      const double degrees = 15.0 + static_cast<double>(rng.next() % 331);  // 15..345
      RasterImage out = box_smooth_selected(hue_rotate_selected(input.image, input.mask, degrees), input.mask);
      if (mode_ == StubMode::global_noise) add_noise(out, nullptr, rng, noise_amplitude_);
      return out;
    }
  }
  return input.image;
}

// ---------------------------------------------------------------------------

HttpBackendConfig http_config_from_env(HttpBackendConfig base) {
  if (const char* url = std::getenv("EXPRFORGE_BACKEND_URL"); url != nullptr && *url != '\0') base.base_url = url;
  if (const char* t = std::getenv("EXPRFORGE_BACKEND_TIMEOUT"); t != nullptr && *t != '\0') {
    char* end = nullptr;
    const double secs = std::strtod(t, &end);
    if (end != t && secs > 0.0) base.timeout = std::chrono::milliseconds(static_cast<long long>(secs * 1000.0));
  }
  return base;
}

std::string build_http_request_body(const HttpBackendConfig& config, const GenerationInput& input) {
  json dots = json::array();
  for (const auto& d : input.context_dots) dots.push_back({d.x, d.y});
  json body = {
      {"init_image", base64_encode(encode_png(input.image))},
      {"mask", base64_encode(encode_mask_png(input.mask))},
      {"control_image", base64_encode(encode_png(input.edge_map))},
      {"prompt", input.prompt},
      {"negative_prompt", input.negative_prompt},
      {"denoising_strength", input.params.denoising_strength},
      {"steps", input.params.sampling_steps},
      {"cfg_scale", input.params.cfg_scale},
      {"seed", input.params.seed.value_or(0)},
      {"controlnet_fraction", input.params.controlnet_steps},
      {"dots", std::move(dots)},
  };
  if (!config.model_name.empty()) body["model"] = config.model_name;
  if (!config.controlnet_model.empty()) body["controlnet_model"] = config.controlnet_model;
  return body.dump();
}

RasterImage parse_http_response_body(const std::string& body) {
  std::string encoded;
  try {
    const json reply = json::parse(body);
    encoded = reply.at("images").at(0).get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("backend response has no image: ") + e.what());
  }
  // Tolerate data-URL prefixes.
  if (auto comma = encoded.find(','); encoded.rfind("data:", 0) == 0 && comma != std::string::npos) {
    encoded.erase(0, comma + 1);
  }
  auto bytes = base64_decode(encoded);
  if (!bytes) throw Error(ErrorCode::MalformedResponse, "backend image is not valid base64");
  try {
    return decode_png(*bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("backend image is not a PNG: ") + e.what());
  }
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw Error(ErrorCode::ParamOutOfRange, "backend base_url must be set", "base_url");
}

BackendDescriptor HttpBackend::descriptor() const { return {"http:" + config_.base_url, BackendKind::http}; }

RasterImage HttpBackend::generate(const GenerationInput& input) {
  std::unique_lock lock(call_mutex_, std::defer_lock);
  if (!config_.concurrent) lock.lock();

  httplib::Client client(config_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  for (const auto& [k, v] : config_.extra_headers) headers.emplace(k, v);
  auto res = client.Post(config_.endpoint_path, headers, build_http_request_body(config_, input), "application/json");
  if (!res) {
    throw Error(ErrorCode::EndpointUnavailable,
                "backend " + config_.base_url + " unavailable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendError, "backend returned HTTP " + std::to_string(res->status) + ": " +
                                             res->body.substr(0, 200));
  }
  RasterImage out = parse_http_response_body(res->body);
  if (out.width() != input.image.width() || out.height() != input.image.height()) {
    throw Error(ErrorCode::DimensionMismatchFromBackend,
                "backend returned " + std::to_string(out.width()) + "x" + std::to_string(out.height()) +
                    ", expected " + std::to_string(input.image.width()) + "x" + std::to_string(input.image.height()));
  }
  return out;
}

// ---------------------------------------------------------------------------

TimingBackend::TimingBackend(std::vector<std::chrono::milliseconds> profile) : profile_(std::move(profile)) {
  if (profile_.empty()) profile_.push_back(std::chrono::milliseconds{0});
}

BackendDescriptor TimingBackend::descriptor() const { return {"timing", BackendKind::timing}; }

RasterImage TimingBackend::generate(const GenerationInput& input) {
  std::chrono::milliseconds delay{};
  {
    std::lock_guard lock(mutex_);
    delay = profile_[calls_ % profile_.size()];
    ++calls_;
    log_.push_back(delay);
  }
  std::this_thread::sleep_for(delay);
  return input.image;
}

std::vector<std::chrono::milliseconds> TimingBackend::scheduled() const {
  std::lock_guard lock(mutex_);
  return log_;
}

void TimingBackend::reset() {
  std::lock_guard lock(mutex_);
  calls_ = 0;
  log_.clear();
}

}  // namespace exprforge
