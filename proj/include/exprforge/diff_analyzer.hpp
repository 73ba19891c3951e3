#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exprforge/image.hpp"

namespace exprforge {

inline constexpr int kDefaultDiffThreshold = 24;
inline constexpr int kMaxL1 = 765;

// Per-pixel |dR| + |dG| + |dB|; alpha is ignored.
class DiffMap {
 public:
  DiffMap() = default;
  DiffMap(int width, int height) : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint16_t at(int x, int y) const noexcept { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, std::uint16_t v) noexcept { values_[static_cast<std::size_t>(y) * width_ + x] = v; }
  const std::vector<std::uint16_t>& values() const noexcept { return values_; }

  friend bool operator==(const DiffMap&, const DiffMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint16_t> values_;
};

struct DiffStats {
  std::size_t pixel_count = 0;
  std::size_t changed_pixel_count = 0;
  std::size_t changed_outside_mask = 0;
  int max_l1_outside_mask = 0;
  int max_l1 = 0;
  double mean_l1 = 0.0;
  double fraction_changed = 0.0;
  bool has_mask = false;
  friend bool operator==(const DiffStats&, const DiffStats&) = default;
};

DiffMap l1_map(const RasterImage& a, const RasterImage& b);

// v -> round(255 * min(v, T) / T), rounding half away from zero.
std::uint8_t gray_level(int value, int threshold);
GrayImage render_grayscale(const DiffMap& map, int threshold = kDefaultDiffThreshold);

DiffStats stats(const DiffMap& map, const SelectionMask* mask = nullptr);
inline DiffStats stats(const DiffMap& map, const SelectionMask& mask) { return stats(map, &mask); }

// Stats of each snapshot against a fixed reference, in order. A dimension
// mismatch names the offending step index.
std::vector<DiffStats> degradation_curve(const std::vector<RasterImage>& snapshots, const RasterImage& reference,
                                         const SelectionMask* mask = nullptr);

std::string stats_to_json(const DiffStats& s);

}  // namespace exprforge
