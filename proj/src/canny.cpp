#include "exprforge/canny.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "exprforge/error.hpp"

namespace exprforge {

GrayImage to_luma(const RasterImage& image) {
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const auto* p = image.pixel(x, y);
      out.set(x, y, static_cast<std::uint8_t>((299 * p[0] + 587 * p[1] + 114 * p[2] + 500) / 1000));
    }
  }
  return out;
}

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int w = image.width(), h = image.height();
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= sum;

  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * image.at(sx, y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(sy) * w + x];
      }
      out.set(x, y, static_cast<std::uint8_t>(std::clamp(std::floor(acc + 0.5), 0.0, 255.0)));
    }
  }
  return out;
}

GrayImage extract_canny(const RasterImage& image, const CannyParams& params) {
  if (params.low < 0.0 || params.high < params.low) {
    throw Error(ErrorCode::ParamOutOfRange, "Canny thresholds must satisfy 0 <= low <= high", "canny");
  }
  const int w = image.width(), h = image.height();
  const GrayImage blurred = gaussian_blur(to_luma(image), params.sigma);

  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  std::vector<int> gx(static_cast<std::size_t>(w) * h), gy(gx.size());
  std::vector<std::int64_t> mag2(gx.size());
  auto px = [&](int x, int y) -> int { return blurred.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int dy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      gx[idx(x, y)] = dx;
      gy[idx(x, y)] = dy;
      mag2[idx(x, y)] = static_cast<std::int64_t>(dx) * dx + static_cast<std::int64_t>(dy) * dy;
    }
  }
  auto m = [&](int x, int y) -> std::int64_t {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return mag2[idx(x, y)];
  };

  // Squared thresholds; a magnitude passes when strictly above the threshold.
  const double low2 = params.low * params.low;
  const double high2 = params.high * params.high;

  // 0 = suppressed, 1 = weak candidate, 2 = strong
  std::vector<std::uint8_t> state(gx.size(), 0);
  constexpr std::int64_t kTan22 = 13573;  // tan(22.5 deg) * 2^15
  constexpr std::int64_t kTan67 = 79109;  // tan(67.5 deg) * 2^15
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t cur = mag2[idx(x, y)];
      if (static_cast<double>(cur) <= low2) continue;
      const std::int64_t ax = std::abs(gx[idx(x, y)]);
      const std::int64_t ay = std::abs(gy[idx(x, y)]);
      std::int64_t before = 0, after = 0;
      bool diagonal = false;
      if ((ay << 15) < ax * kTan22) {
        before = m(x - 1, y);
        after = m(x + 1, y);
      } else if ((ay << 15) > ax * kTan67) {
        before = m(x, y - 1);
        after = m(x, y + 1);
      } else if ((gx[idx(x, y)] < 0) == (gy[idx(x, y)] < 0)) {
        before = m(x - 1, y - 1);
        after = m(x + 1, y + 1);
        diagonal = true;
      } else {
        before = m(x + 1, y - 1);
        after = m(x - 1, y + 1);
        diagonal = true;
      }
      // Axis-aligned sectors compare asymmetrically so exactly one of two equal
      // ridge pixels survives; diagonal sectors require a strict maximum.
      const bool keep = diagonal ? (cur > before && cur > after) : (cur > before && cur >= after);
      if (keep) state[idx(x, y)] = static_cast<double>(cur) > high2 ? 2 : 1;
    }
  }

  GrayImage out(w, h);
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (state[idx(x, y)] == 2) {
        out.set(x, y, 255);
        stack.push_back(idx(x, y));
      }
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        const int nx = x + ox, ny = y + oy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (state[idx(nx, ny)] == 1 && out.at(nx, ny) == 0) {
          out.set(nx, ny, 255);
          stack.push_back(idx(nx, ny));
        }
      }
    }
  }
  return out;
}

}  // namespace exprforge
