#include "cris/image_encoder.hpp"

#include <string>

#include "cris/ops.hpp"

namespace cris {

ImageEncoder::ImageEncoder(ParameterStore& store, const RunConfig& config, Rng& rng) {
  auto make = [&](const std::string& name, int in, int out, int stride) {
    return Conv{store.add(name + ".w", {out, in, 3, 3}, Init::kFanInUniform, rng, in * 9),
                store.add(name + ".b", {out}, Init::kZeros, rng), stride};
  };
  stem_[0] = make("image.stem0", 3, config.stem[0], 2);
  stem_[1] = make("image.stem1", config.stem[0], config.stem[1], 2);
  int in = config.stem[1];
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string p = "image.stage" + std::to_string(s + 2);
    const int out = config.backbone[s];
    stages_[s][0] = make(p + ".down", in, out, 2);
    stages_[s][1] = make(p + ".conv", out, out, 1);
    in = out;
  }
}

Tensor ImageEncoder::apply(const Conv& conv, const Tensor& x) const {
  return relu(conv2d(x, conv.w, conv.b, conv.stride, 1));
}

FeaturePyramid ImageEncoder::encode(const Tensor& img) const {
  if (img.shape().rank() != 3 || img.shape()[0] != 3) throw ShapeError("encode_image: expected [3,H,W], got " + img.shape().str());
  if (img.shape()[1] % 32 != 0 || img.shape()[2] % 32 != 0) {
    throw ShapeError("encode_image: spatial extents of " + img.shape().str() + " are not divisible by 32");
  }
  Tensor x = apply(stem_[1], apply(stem_[0], img));
  std::array<Tensor, 3> levels;
  for (std::size_t s = 0; s < 3; ++s) {
    x = apply(stages_[s][1], apply(stages_[s][0], x));
    levels[s] = x;
  }
  return {levels[0], levels[1], levels[2]};
}

}  // namespace cris
