#include "cris/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cris/tensor.hpp"

namespace cris {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

GroundTruthMask GroundTruthMask::from_full(const BinaryMask& full, int loss_h, int loss_w) {
  if (loss_h < 1 || loss_w < 1 || loss_h > full.height || loss_w > full.width) {
    throw ShapeError("ground truth: loss grid larger than the mask");
  }
  auto nearest = [](int i, int n_out, int n_in) {
    return n_out > 1 ? static_cast<int>(std::lround(static_cast<double>(i) * (n_in - 1) / (n_out - 1))) : 0;
  };
  GroundTruthMask gt;
  gt.full = full;
  gt.loss = BinaryMask(loss_h, loss_w);
  for (int y = 0; y < loss_h; ++y)
    for (int x = 0; x < loss_w; ++x) {
      gt.loss.pixels[static_cast<std::size_t>(y * loss_w + x)] = full.at(nearest(y, loss_h, full.height), nearest(x, loss_w, full.width));
    }
  return gt;
}

std::vector<int> GroundTruthMask::positives() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < loss.pixels.size(); ++i)
    if (loss.pixels[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<int> GroundTruthMask::negatives() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < loss.pixels.size(); ++i)
    if (!loss.pixels[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

}  // namespace cris
