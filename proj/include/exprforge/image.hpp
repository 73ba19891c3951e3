#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace exprforge {

using Rgba = std::array<std::uint8_t, 4>;

inline constexpr Rgba kWhite{255, 255, 255, 255};
inline constexpr Rgba kTransparent{0, 0, 0, 0};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

// 8-bit RGBA raster, row-major, 4 bytes per pixel.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgba fill = {0, 0, 0, 255});
  RasterImage(int width, int height, std::vector<std::uint8_t> rgba);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  Rgba at(int x, int y) const noexcept {
    const auto* p = &data_[offset(x, y)];
    return {p[0], p[1], p[2], p[3]};
  }
  void set(int x, int y, Rgba v) noexcept {
    auto* p = &data_[offset(x, y)];
    p[0] = v[0];
    p[1] = v[1];
    p[2] = v[2];
    p[3] = v[3];
  }
  std::uint8_t* pixel(int x, int y) noexcept { return &data_[offset(x, y)]; }
  const std::uint8_t* pixel(int x, int y) const noexcept { return &data_[offset(x, y)]; }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept { return data_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 4;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Binary per-pixel selection; 1 = editable. There is no partial selection.
class SelectionMask {
 public:
  SelectionMask() = default;
  SelectionMask(int width, int height, bool value = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool at(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) noexcept { bits_[index(x, y)] = v ? 1 : 0; }

  // Selection test that treats out-of-range coordinates as unselected.
  bool selected(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && at(x, y);
  }

  std::size_t count() const noexcept;
  bool any() const noexcept { return count() > 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

 private:
  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Single-channel 8-bit image (edge maps, grayscale diff renders).
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint8_t at(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, std::uint8_t v) noexcept { data_[static_cast<std::size_t>(y) * width_ + x] = v; }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

RasterImage crop(const RasterImage& image, const Rect& box);
SelectionMask crop(const SelectionMask& mask, const Rect& box);

// Tight bounding box of the selected bits; width/height 0 when nothing is selected.
Rect bounding_box(const SelectionMask& mask);

// Mask -> 0/255 gray image, and back (any nonzero value selects).
GrayImage to_gray(const SelectionMask& mask);

}  // namespace exprforge
