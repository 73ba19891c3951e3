#include "exprforge/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "exprforge/error.hpp"

namespace exprforge {

namespace {

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> decode_as(std::span<const std::uint8_t> bytes, png_uint_32 format, int& width,
                                    int& height) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::InvalidImage, std::string("cannot read PNG: ") + png.image.message);
  }
  png.image.format = format;
  std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, out.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidImage, std::string("cannot decode PNG: ") + png.image.message);
  }
  width = static_cast<int>(png.image.width);
  height = static_cast<int>(png.image.height);
  return out;
}

std::vector<std::uint8_t> encode_as(const std::uint8_t* pixels, int width, int height, png_uint_32 format) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::InvalidImage, std::string("cannot size PNG: ") + png.image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::InvalidImage, std::string("cannot encode PNG: ") + png.image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  auto data = decode_as(bytes, PNG_FORMAT_RGBA, w, h);
  return RasterImage(w, h, std::move(data));
}

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
  return encode_as(image.bytes().data(), image.width(), image.height(), PNG_FORMAT_RGBA);
}

GrayImage decode_gray_png(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  auto data = decode_as(bytes, PNG_FORMAT_GRAY, w, h);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.set(x, y, data[static_cast<std::size_t>(y) * w + x]);
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  return encode_as(image.bytes().data(), image.width(), image.height(), PNG_FORMAT_GRAY);
}

SelectionMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  const GrayImage gray = decode_gray_png(bytes);
  SelectionMask mask(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      const auto v = gray.at(x, y);
      if (v != 0 && v != 255) {
        throw Error(ErrorCode::InvalidImage, "mask PNG must contain only 0 and 255", "mask");
      }
      mask.set(x, y, v == 255);
    }
  }
  return mask;
}

std::vector<std::uint8_t> encode_mask_png(const SelectionMask& mask) { return encode_png(to_gray(mask)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string(), path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string(), path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace exprforge
