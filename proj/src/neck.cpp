#include "cris/neck.hpp"

#include "cris/ops.hpp"

namespace cris {

namespace {

void require_grid(const Tensor& t, int h, int w, const char* what) {
  if (t.shape().rank() != 3 || t.shape()[1] != h || t.shape()[2] != w) {
    throw ShapeError(std::string("neck: ") + what + " " + t.shape().str() + " is off the " + std::to_string(h) + "x" +
                     std::to_string(w) + " grid");
  }
}

}  // namespace

CrossModalNeck::CrossModalNeck(ParameterStore& store, const RunConfig& config, Rng& rng) : width_(config.width) {
  const int c = config.width, half = c / 2;
  auto conv = [&](const std::string& name, int in, int out, int k, Tensor& w, Tensor& b) {
    w = store.add("neck." + name + ".w", {out, in, k, k}, Init::kFanInUniform, rng, in * k * k);
    b = store.add("neck." + name + ".b", {out}, Init::kZeros, rng);
  };
  conv("v4", config.backbone[2], c, 1, wv4_, bv4_);
  ws_ = store.add("neck.s.w", {config.text_width, c}, Init::kFanInUniform, rng, config.text_width);
  bs_ = store.add("neck.s.b", {c}, Init::kZeros, rng);
  conv("m4", c, half, 1, wm4_, bm4_);
  conv("v3", config.backbone[1], half, 1, wv3_, bv3_);
  conv("m3", c, half, 1, wm3_, bm3_);
  conv("v2", config.backbone[0], half, 1, wv2_, bv2_);
  conv("aggregate", 3 * c, c, 1, agg_w_, agg_b_);
  conv("coord", c + 2, c, 3, coord_w_, coord_b_);
}

Tensor CrossModalNeck::fuse_stage4(const Tensor& v4, const Tensor& sentence) const {
  if (sentence.shape().rank() != 1) throw ShapeError("neck: sentence feature must be a vector");
  const Tensor visual = relu(conv2d(v4, wv4_, bv4_, 1, 0));
  const Tensor text = relu(reshape(linear(reshape(sentence, Shape{1, sentence.shape()[0]}), ws_, bs_), Shape{width_}));
  return upsample(mul_channels(visual, text), 2);
}

std::pair<Tensor, Tensor> CrossModalNeck::fuse_lower(const Tensor& m4, const Tensor& v3, const Tensor& v2) const {
  const int h = m4.shape()[1], w = m4.shape()[2];
  require_grid(v3, h, w, "F_v3");
  const Tensor v2_pooled = avgpool2(v2);
  require_grid(v2_pooled, h, w, "pooled F_v2");
  const Tensor m3 = concat({relu(conv2d(m4, wm4_, bm4_, 1, 0)), relu(conv2d(v3, wv3_, bv3_, 1, 0))}, 0);
  const Tensor m2 = concat({relu(conv2d(m3, wm3_, bm3_, 1, 0)), relu(conv2d(v2_pooled, wv2_, bv2_, 1, 0))}, 0);
  return {m3, m2};
}

NeckOutput CrossModalNeck::aggregate_and_flatten(const Tensor& m2, const Tensor& m3, const Tensor& m4) const {
  const int h = m4.shape()[1], w = m4.shape()[2];
  require_grid(m3, h, w, "F_m3");
  require_grid(m2, h, w, "F_m2");
  NeckOutput out;
  out.m4 = m4;
  out.m3 = m3;
  out.m2 = m2;
  out.grid_h = h;
  out.grid_w = w;
  out.fused = conv2d(concat({m2, m3, m4}, 0), agg_w_, agg_b_, 1, 0);
  out.coord = coord_features(h, w);
  const Tensor map = conv2d(concat({out.fused, out.coord}, 0), coord_w_, coord_b_, 1, 1);
  out.sequence = flatten_map(map);
  return out;
}

NeckOutput CrossModalNeck::forward(const FeaturePyramid& pyramid, const Tensor& sentence) const {
  const Tensor m4 = fuse_stage4(pyramid.v4, sentence);
  auto [m3, m2] = fuse_lower(m4, pyramid.v3, pyramid.v2);
  return aggregate_and_flatten(m2, m3, m4);
}

Tensor coord_features(int height, int width) {
  Array out(Shape{2, height, width});
  auto lin = [](int i, int n) { return n > 1 ? -1.0 + 2.0 * i / (n - 1) : 0.0; };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y * width + x)] = lin(x, width);
      out[static_cast<std::size_t>((height + y) * width + x)] = lin(y, height);
    }
  return Tensor(std::move(out));
}

}  // namespace cris
