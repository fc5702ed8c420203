#pragma once

#include <cstdint>
#include <vector>

namespace cris {

/// Binary mask, row-major, values 0 or 1.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

/// Ground truth at full and loss resolution. The loss grid samples the full
/// mask by nearest neighbour under the same corner-aligned geometry the
/// predictions are upsampled with.
struct GroundTruthMask {
  BinaryMask full;
  BinaryMask loss;

  static GroundTruthMask from_full(const BinaryMask& full, int loss_h, int loss_w);
  std::vector<int> positives() const;  // P: loss-grid indices of 1-pixels
  std::vector<int> negatives() const;  // N: loss-grid indices of 0-pixels
};

}  // namespace cris
