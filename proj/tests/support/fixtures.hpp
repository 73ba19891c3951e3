#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "exprforge/edit_pipeline.hpp"
#include "exprforge/expression_db.hpp"
#include "exprforge/image.hpp"

namespace fixtures {

using exprforge::RasterImage;
using exprforge::Rgba;
using exprforge::SelectionMask;

inline const std::string kElaraStory =
    "As the master chef lifted the silver lid, the aroma of the legendary golden truffle pasta wafted through the "
    "dining hall. Young Elara had waited three years for this reservation, having saved every coin from her "
    "apprenticeship to afford a single plate. When she saw the perfectly glazed noodles shimmering under the "
    "chandelier, her breath caught in her throat.";

inline std::filesystem::path sample_db_path() { return EXPRFORGE_SAMPLE_DB; }

inline const exprforge::ExpressionDatabase& sample_db() {
  static const exprforge::ExpressionDatabase db = exprforge::load_database(sample_db_path());
  return db;
}

inline RasterImage random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> d(0, 255);
  RasterImage img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(d(rng));
  return img;
}

// Random blobby selection; guaranteed to select at least one pixel.
inline SelectionMask random_mask(std::mt19937_64& rng, int w, int h) {
  SelectionMask m(w, h);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (kind(rng)) {
    case 0: {
      const double cx = u(rng) * w, cy = u(rng) * h, r = 1.0 + u(rng) * std::max(w, h) / 2.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, std::hypot(x - cx, y - cy) <= r);
      break;
    }
    case 1: {
      std::uniform_int_distribution<int> dx(0, w - 1), dy(0, h - 1);
      int x0 = dx(rng), x1 = dx(rng), y0 = dy(rng), y1 = dy(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.set(x, y, true);
      break;
    }
    default: {
      const double p = 0.05 + 0.5 * u(rng);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, u(rng) < p);
      break;
    }
  }
  if (!m.any()) m.set(w / 2, h / 2, true);
  return m;
}

inline SelectionMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  SelectionMask m(w, h);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.set(x, y, true);
  return m;
}

inline SelectionMask disc_mask(int w, int h, double cx, double cy, double r) {
  SelectionMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, std::hypot(x - cx, y - cy) <= r);
  return m;
}

// Smooth synthetic portrait: gradient background, skin-tone face disc, two eyes.
inline RasterImage portrait(int size) {
  RasterImage img(size, size);
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgba px{static_cast<std::uint8_t>(90 + 120 * y / size), static_cast<std::uint8_t>(140), static_cast<std::uint8_t>(200), 255};
      if (std::hypot(x - c, y - c) < size * 0.35) px = {250, 218, 196, 255};
      if (std::hypot(x - c + size * 0.12, y - c + size * 0.05) < size * 0.06) px = {60, 90, 160, 255};
      if (std::hypot(x - c - size * 0.12, y - c + size * 0.05) < size * 0.06) px = {60, 90, 160, 255};
      img.set(x, y, px);
    }
  }
  return img;
}

// Minimum Chebyshev distance from (x, y) to a selected pixel; -1 when none.
inline int distance_to_selection(const SelectionMask& m, int x, int y) {
  const int limit = std::max(m.width(), m.height());
  for (int r = 0; r <= limit; ++r) {
    for (int yy = y - r; yy <= y + r; ++yy)
      for (int xx = x - r; xx <= x + r; ++xx)
        if ((std::abs(xx - x) == r || std::abs(yy - y) == r) && m.selected(xx, yy)) return r;
  }
  return -1;
}

// Chebyshev distance from a selected pixel to the nearest in-bounds unselected pixel; -1 when none.
inline int distance_to_unselected(const SelectionMask& m, int x, int y) {
  const int limit = std::max(m.width(), m.height());
  for (int r = 1; r <= limit; ++r) {
    for (int yy = y - r; yy <= y + r; ++yy)
      for (int xx = x - r; xx <= x + r; ++xx) {
        if (std::abs(xx - x) != r && std::abs(yy - y) != r) continue;
        if (xx < 0 || yy < 0 || xx >= m.width() || yy >= m.height()) continue;
        if (!m.at(xx, yy)) return r;
      }
  }
  return -1;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("exprforge-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
