#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cris/mask.hpp"
#include "cris/tensor.hpp"

namespace cris {

/// 8-bit interleaved RGB, row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, 0) {}
  bool operator==(const RgbImage&) const = default;
};

/// 8-bit single channel, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
  bool operator==(const GrayImage&) const = default;
};

// Binary netpbm only: P6 with maxval 255 for images, P5 with maxval 255 for masks.
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);

/// Foreground 255, background 0.
std::vector<std::uint8_t> encode_mask(const BinaryMask& mask);
/// Throws DataError("mask not binary") on any value other than 0 or 255.
BinaryMask decode_mask(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// [3, H, W] tensor with channel values mapped from [0, 255] to [-1, 1].
Tensor image_tensor(const RgbImage& image);

}  // namespace cris
