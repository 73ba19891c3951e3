#pragma once

#include "exprforge/image.hpp"

namespace exprforge {

struct CannyParams {
  double low = 100.0;   // weak threshold on the Sobel gradient magnitude
  double high = 200.0;  // strong threshold
  double sigma = 1.4;   // Gaussian pre-blur
};

// Rec.601 luma, integer-rounded.
GrayImage to_luma(const RasterImage& image);

// Separable Gaussian, radius ceil(3*sigma), replicated borders, rounded to 8 bits.
GrayImage gaussian_blur(const GrayImage& image, double sigma);

// Canny edge detector: luma -> Gaussian blur -> 3x3 Sobel (L2 magnitude) ->
// non-maximum suppression -> double-threshold hysteresis (8-connected).
// Output is 255 on edge pixels and 0 elsewhere. Everything after the blur is
// integer arithmetic, so results are identical across runs and platforms.
GrayImage extract_canny(const RasterImage& image, const CannyParams& params = {});

}  // namespace exprforge
