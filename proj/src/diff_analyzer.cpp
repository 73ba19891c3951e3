#include "exprforge/diff_analyzer.hpp"

#include <algorithm>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "exprforge/error.hpp"

namespace exprforge {

DiffMap l1_map(const RasterImage& a, const RasterImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "compared images differ in size");
  }
  DiffMap out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const auto* p = a.pixel(x, y);
      const auto* q = b.pixel(x, y);
      out.set(x, y, static_cast<std::uint16_t>(std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]) + std::abs(p[2] - q[2])));
    }
  }
  return out;
}

std::uint8_t gray_level(int value, int threshold) {
  if (threshold < 1) throw Error(ErrorCode::ParamOutOfRange, "threshold must be >= 1", "threshold");
  const int v = std::clamp(value, 0, threshold);
  return static_cast<std::uint8_t>((2 * 255 * v + threshold) / (2 * threshold));
}

GrayImage render_grayscale(const DiffMap& map, int threshold) {
  if (threshold < 1) throw Error(ErrorCode::ParamOutOfRange, "threshold must be >= 1", "threshold");
  GrayImage out(map.width(), map.height());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) out.set(x, y, gray_level(map.at(x, y), threshold));
  }
  return out;
}

DiffStats stats(const DiffMap& map, const SelectionMask* mask) {
  if (mask != nullptr && (mask->width() != map.width() || mask->height() != map.height())) {
    throw Error(ErrorCode::DimensionMismatch, "mask and diff map differ in size", "mask");
  }
  DiffStats s;
  s.has_mask = mask != nullptr;
  s.pixel_count = map.values().size();
  std::uint64_t total = 0;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const int v = map.at(x, y);
      total += static_cast<std::uint64_t>(v);
      s.max_l1 = std::max(s.max_l1, v);
      if (v == 0) continue;
      ++s.changed_pixel_count;
      if (mask != nullptr && !mask->at(x, y)) {
        ++s.changed_outside_mask;
        s.max_l1_outside_mask = std::max(s.max_l1_outside_mask, v);
      }
    }
  }
  if (s.pixel_count > 0) {
    s.mean_l1 = static_cast<double>(total) / static_cast<double>(s.pixel_count);
    s.fraction_changed = static_cast<double>(s.changed_pixel_count) / static_cast<double>(s.pixel_count);
  }
  return s;
}

std::vector<DiffStats> degradation_curve(const std::vector<RasterImage>& snapshots, const RasterImage& reference,
                                         const SelectionMask* mask) {
  std::vector<DiffStats> curve;
  curve.reserve(snapshots.size());
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (snapshots[i].width() != reference.width() || snapshots[i].height() != reference.height()) {
      throw Error(ErrorCode::DimensionMismatch, "snapshot " + std::to_string(i) + " differs in size from the reference",
                  std::to_string(i));
    }
    curve.push_back(stats(l1_map(reference, snapshots[i]), mask));
  }
  return curve;
}

std::string stats_to_json(const DiffStats& s) {
  nlohmann::ordered_json j;
  j["pixel_count"] = s.pixel_count;
  j["changed_pixel_count"] = s.changed_pixel_count;
  j["fraction_changed"] = s.fraction_changed;
  j["mean_l1"] = s.mean_l1;
  j["max_l1"] = s.max_l1;
  if (s.has_mask) {
    j["changed_outside_mask"] = s.changed_outside_mask;
    j["max_l1_outside_mask"] = s.max_l1_outside_mask;
  }
  return j.dump();
}

}  // namespace exprforge
