#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "exprforge/image.hpp"

namespace exprforge {

// PNG codec on libpng's simplified API. Encoding is deterministic.

RasterImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RasterImage& image);

GrayImage decode_gray_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& image);

// Masks are single-channel 0/255 PNGs; any other gray level is InvalidImage.
SelectionMask decode_mask_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask_png(const SelectionMask& mask);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

inline RasterImage read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }
inline SelectionMask read_mask_png(const std::filesystem::path& path) {
  return decode_mask_png(read_file_bytes(path));
}

}  // namespace exprforge
