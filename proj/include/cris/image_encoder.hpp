#pragma once

#include <array>
#include <vector>

#include "cris/config.hpp"
#include "cris/parameters.hpp"

namespace cris {

/// Visual features at strides 8, 16 and 32.
struct FeaturePyramid {
  Tensor v2;  // [C2, H/8,  W/8]
  Tensor v3;  // [C3, H/16, W/16]
  Tensor v4;  // [C4, H/32, W/32]
};

/// Mini convolutional backbone: a stride-4 stem of two stride-2 conv3x3+ReLU
/// blocks, then three stages of (stride-2 conv3x3+ReLU, conv3x3+ReLU).
class ImageEncoder {
 public:
  ImageEncoder(ParameterStore& store, const RunConfig& config, Rng& rng);

  /// img is [3, H, W] with H and W divisible by 32.
  FeaturePyramid encode(const Tensor& img) const;

 private:
  struct Conv {
    Tensor w, b;
    int stride;
  };
  Tensor apply(const Conv& conv, const Tensor& x) const;

  std::array<Conv, 2> stem_;
  std::array<std::array<Conv, 2>, 3> stages_;
};

}  // namespace cris
