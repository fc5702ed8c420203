#include "cris/decoder.hpp"

#include <algorithm>

#include "cris/ops.hpp"

namespace cris {

VisionLanguageDecoder::VisionLanguageDecoder(ParameterStore& store, const RunConfig& config, Rng& rng)
    : width_(config.width), heads_(config.decoder.n_heads) {
  const int c = config.width;
  for (int l = 0; l < config.decoder.n_layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l);
    Layer layer;
    layer.ln_self = LayerNormParams::create(store, p + ".ln_self", c, rng);
    layer.self_attn = AttentionParams::create(store, p + ".self_attn", c, rng);
    layer.ln_cross = LayerNormParams::create(store, p + ".ln_cross", c, rng);
    layer.cross_attn = AttentionParams::create(store, p + ".cross_attn", c, rng);
    layer.ln_mlp = LayerNormParams::create(store, p + ".ln_mlp", c, rng);
    layer.mlp = MlpParams::create(store, p + ".mlp", c, config.decoder.d_ffn, rng);
    layers_.push_back(std::move(layer));
  }
}

Tensor VisionLanguageDecoder::decode(const Tensor& visual, int grid_h, int grid_w, const TextFeatures& text,
                                     DecoderTrace* trace, bool use_positions) const {
  if (visual.shape().rank() != 2 || visual.shape()[0] != grid_h * grid_w || visual.shape()[1] != width_) {
    throw ShapeError("decode: visual sequence " + visual.shape().str() + " does not match the grid");
  }
  if (text.tokens.shape()[1] != width_) throw ShapeError("decode: text width mismatch");
  Tensor pos_v, pos_t;
  if (use_positions) {
    pos_v = sine_pos_2d(grid_h, grid_w, width_);
    pos_t = sine_pos_1d(text.tokens.shape()[0], width_);
  }
  Tensor x = visual;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const Tensor& pv = l == 0 ? pos_v : Tensor();
    const Tensor& pt = l == 0 ? pos_t : Tensor();
    AttentionTrace* self_trace = nullptr;
    AttentionTrace* cross_trace = nullptr;
    if (trace) {
      self_trace = &trace->self_attention.emplace_back();
      cross_trace = &trace->cross_attention.emplace_back();
    }
    x = add(x, mhsa(layer.ln_self(x), layer.self_attn, heads_, pv, false, self_trace));
    x = add(x, mhca(layer.ln_cross(x), text.tokens, text.pad_mask, layer.cross_attn, heads_, pv, pt, cross_trace));
    x = add(x, layer.mlp(layer.ln_mlp(x)));
  }
  return x;
}

void VisionLanguageDecoder::zero_output_projections() {
  auto zero = [](Tensor& t) {
    auto v = t.mutable_value().data();
    std::fill(v.begin(), v.end(), 0.0);
  };
  for (Layer& layer : layers_) {
    zero(layer.self_attn.wo);
    zero(layer.self_attn.bo);
    zero(layer.cross_attn.wo);
    zero(layer.cross_attn.bo);
    zero(layer.mlp.w2);
    zero(layer.mlp.b2);
  }
}

}  // namespace cris
