#include "exprforge/image.hpp"

#include <algorithm>
#include <stdexcept>

#include "exprforge/error.hpp"

namespace exprforge {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidImage, "image dimensions must be at least 1x1");
  }
}

}  // namespace

RasterImage::RasterImage(int width, int height, Rgba fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.resize(pixel_count() * 4);
  for (std::size_t i = 0; i < data_.size(); i += 4) {
    std::copy(fill.begin(), fill.end(), data_.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> rgba)
    : width_(width), height_(height), data_(std::move(rgba)) {
  check_dims(width, height);
  if (data_.size() != pixel_count() * 4) {
    throw Error(ErrorCode::InvalidImage, "pixel buffer size does not match width*height*4");
  }
}

SelectionMask::SelectionMask(int width, int height, bool value) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, value ? 1 : 0);
}

std::size_t SelectionMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

RasterImage crop(const RasterImage& image, const Rect& box) {
  RasterImage out(box.width, box.height);
  for (int y = 0; y < box.height; ++y) {
    const auto* src = image.pixel(box.x, box.y + y);
    std::copy(src, src + static_cast<std::ptrdiff_t>(box.width) * 4, out.pixel(0, y));
  }
  return out;
}

SelectionMask crop(const SelectionMask& mask, const Rect& box) {
  SelectionMask out(box.width, box.height);
  for (int y = 0; y < box.height; ++y) {
    for (int x = 0; x < box.width; ++x) out.set(x, y, mask.at(box.x + x, box.y + y));
  }
  return out;
}

Rect bounding_box(const SelectionMask& mask) {
  int min_x = mask.width(), min_y = mask.height(), max_x = -1, max_y = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return {};
  return {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
}

GrayImage to_gray(const SelectionMask& mask) {
  GrayImage out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, mask.at(x, y) ? 255 : 0);
  }
  return out;
}

}  // namespace exprforge
