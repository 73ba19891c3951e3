#include <doctest.h>

#include <random>

#include "exprforge/canny.hpp"
#include "exprforge/error.hpp"
#include "fixtures.hpp"

using namespace exprforge;

namespace {

std::size_t edge_count(const GrayImage& g) {
  std::size_t n = 0;
  for (auto v : g.bytes()) n += v != 0 ? 1 : 0;
  return n;
}

}  // namespace

TEST_SUITE("canny") {
  TEST_CASE("uniform image has no edges") {
    const RasterImage gray(40, 30, Rgba{128, 128, 128, 255});
    CHECK(edge_count(extract_canny(gray)) == 0);
  }

  TEST_CASE("output is binary 0/255") {
    std::mt19937_64 rng(5);
    const auto e = extract_canny(fixtures::random_image(rng, 32, 32));
    for (auto v : e.bytes()) CHECK((v == 0 || v == 255));
  }

  TEST_CASE("luma uses integer Rec.601 weights") {
    RasterImage img(3, 1);
    img.set(0, 0, {255, 0, 0, 255});
    img.set(1, 0, {0, 255, 0, 255});
    img.set(2, 0, {0, 0, 255, 255});
    const auto l = to_luma(img);
    CHECK(l.at(0, 0) == 76);   // 0.299 * 255 = 76.245
    CHECK(l.at(1, 0) == 150);  // 0.587 * 255 = 149.685
    CHECK(l.at(2, 0) == 29);   // 0.114 * 255 = 29.07
  }

  TEST_CASE("blur preserves constants and is symmetric") {
    const GrayImage flat(9, 9, 77);
    CHECK(gaussian_blur(flat, 1.4) == flat);
    GrayImage dot(21, 21, 0);
    dot.set(10, 10, 255);
    const auto b = gaussian_blur(dot, 1.4);
    for (int d = 1; d <= 5; ++d) {
      CHECK(b.at(10 - d, 10) == b.at(10 + d, 10));
      CHECK(b.at(10, 10 - d) == b.at(10, 10 + d));
      CHECK(b.at(10 - d, 10) == b.at(10, 10 - d));
    }
  }

  TEST_CASE("vertical half split yields one 1-pixel column") {
    RasterImage img(32, 24, Rgba{0, 0, 0, 255});
    for (int y = 0; y < 24; ++y)
      for (int x = 16; x < 32; ++x) img.set(x, y, {255, 255, 255, 255});
    const auto e = extract_canny(img);
    int column = -1;
    for (int y = 0; y < 24; ++y) {
      int count = 0;
      for (int x = 0; x < 32; ++x) {
        if (e.at(x, y) == 0) continue;
        ++count;
        if (column < 0) column = x;
        CHECK(x == column);
      }
      CHECK(count == 1);
    }
    CHECK((column == 15 || column == 16));
  }

  TEST_CASE("checkerboard edges follow every cell boundary") {
    constexpr int kCell = 8, kSize = 64;
    RasterImage img(kSize, kSize);
    for (int y = 0; y < kSize; ++y)
      for (int x = 0; x < kSize; ++x) {
        const std::uint8_t v = ((x / kCell + y / kCell) % 2) ? 255 : 0;
        img.set(x, y, {v, v, v, 255});
      }
    const auto e = extract_canny(img);
    // Within two pixels of a cell boundary; corners blur into short diagonals.
    const auto near_boundary = [](int v) { return v % kCell <= 1 || v % kCell >= kCell - 2; };
    for (int y = 0; y < kSize; ++y)
      for (int x = 0; x < kSize; ++x)
        if (e.at(x, y)) CHECK((near_boundary(x) || near_boundary(y)));
    // Every boundary segment is present away from the corners.
    for (int b = kCell; b < kSize; b += kCell) {
      for (int t = 0; t < kSize; ++t) {
        if (t % kCell < 2 || t % kCell > kCell - 3) continue;
        CHECK((e.at(b - 1, t) || e.at(b, t)));
        CHECK((e.at(t, b - 1) || e.at(t, b)));
      }
    }
  }

  TEST_CASE("deterministic") {
    std::mt19937_64 rng(17);
    const auto img = fixtures::portrait(64);
    CHECK(extract_canny(img) == extract_canny(img));
    const auto noisy = fixtures::random_image(rng, 48, 40);
    CHECK(extract_canny(noisy, {50, 120, 1.0}) == extract_canny(noisy, {50, 120, 1.0}));
  }

  TEST_CASE("higher thresholds never add edges") {
    const auto img = fixtures::portrait(64);
    const auto lo = extract_canny(img, {20, 60, 1.4});
    const auto hi = extract_canny(img, {100, 200, 1.4});
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (hi.at(x, y)) CHECK(lo.at(x, y));
  }

  TEST_CASE("invalid thresholds") {
    const RasterImage img(4, 4);
    CHECK_THROWS_AS(extract_canny(img, {200, 100, 1.4}), Error);
    CHECK_THROWS_AS(extract_canny(img, {-1, 100, 1.4}), Error);
  }
}
