#include "cris/layers.hpp"

#include <cmath>

#include "cris/ops.hpp"

namespace cris {

LayerNormParams LayerNormParams::create(ParameterStore& store, const std::string& prefix, int width, Rng& rng) {
  return {store.add(prefix + ".gain", {width}, Init::kOnes, rng), store.add(prefix + ".bias", {width}, Init::kZeros, rng)};
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }

AttentionParams AttentionParams::create(ParameterStore& store, const std::string& prefix, int width, Rng& rng) {
  AttentionParams p;
  auto weight = [&](const char* name) { return store.add(prefix + "." + name, {width, width}, Init::kFanInUniform, rng, width); };
  auto bias = [&](const char* name) { return store.add(prefix + "." + name, {width}, Init::kZeros, rng); };
  p.wq = weight("wq");
  p.bq = bias("bq");
  p.wk = weight("wk");
  p.wv = weight("wv");
  p.bv = bias("bv");
  p.wo = weight("wo");
  p.bo = bias("bo");
  return p;
}

Tensor multi_head_attention(const AttentionParams& p, const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                            int heads, std::span<const std::uint8_t> key_mask, bool causal, AttentionTrace* trace) {
  const int width = q_in.shape()[1];
  if (heads < 1 || width % heads != 0) throw ShapeError("attention: heads must divide width");
  const int dk = width / heads;
  // Folding 1/sqrt(d_k) into Q scales every head's logits identically.
  const Tensor q = scale(linear(q_in, p.wq, p.bq), 1.0 / std::sqrt(static_cast<double>(dk)));
  const Tensor k = linear(k_in, p.wk, Tensor());
  const Tensor v = linear(v_in, p.wv, p.bv);
  std::vector<Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : slice_cols(q, h * dk, dk);
    const Tensor kh = heads == 1 ? k : slice_cols(k, h * dk, dk);
    const Tensor vh = heads == 1 ? v : slice_cols(v, h * dk, dk);
    const Tensor weights = masked_softmax(matmul(qh, transpose(kh)), key_mask, causal);
    if (trace) trace->weights.push_back(weights);
    outputs.push_back(matmul(weights, vh));
  }
  const Tensor merged = heads == 1 ? outputs.front() : concat(outputs, 1);
  return linear(merged, p.wo, p.bo);
}

Tensor mhsa(const Tensor& x, const AttentionParams& p, int heads, const Tensor& pos, bool causal, AttentionTrace* trace) {
  const Tensor qk = pos.defined() ? add(x, pos) : x;
  return multi_head_attention(p, qk, qk, x, heads, {}, causal, trace);
}

Tensor mhca(const Tensor& x, const Tensor& text, std::span<const std::uint8_t> pad_mask, const AttentionParams& p,
            int heads, const Tensor& pos_q, const Tensor& pos_k, AttentionTrace* trace) {
  const Tensor q = pos_q.defined() ? add(x, pos_q) : x;
  const Tensor k = pos_k.defined() ? add(text, pos_k) : text;
  return multi_head_attention(p, q, k, text, heads, pad_mask, false, trace);
}

MlpParams MlpParams::create(ParameterStore& store, const std::string& prefix, int width, int hidden, Rng& rng) {
  MlpParams p;
  p.w1 = store.add(prefix + ".w1", {width, hidden}, Init::kFanInUniform, rng, width);
  p.b1 = store.add(prefix + ".b1", {hidden}, Init::kZeros, rng);
  p.w2 = store.add(prefix + ".w2", {hidden, width}, Init::kFanInUniform, rng, hidden);
  p.b2 = store.add(prefix + ".b2", {width}, Init::kZeros, rng);
  return p;
}

Tensor MlpParams::operator()(const Tensor& x) const { return linear(relu(linear(x, w1, b1)), w2, b2); }

namespace {

void fill_sine(double* row, int channels, double position) {
  for (int i = 0; 2 * i < channels; ++i) {
    const double freq = std::pow(10000.0, 2.0 * i / channels);
    row[2 * i] = std::sin(position / freq);
    if (2 * i + 1 < channels) row[2 * i + 1] = std::cos(position / freq);
  }
}

}  // namespace

Tensor sine_pos_1d(int length, int channels) {
  if (length < 1 || channels < 2 || channels % 2 != 0) throw ShapeError("sine_pos_1d: channels must be even");
  Array out(Shape{length, channels});
  for (int p = 0; p < length; ++p) fill_sine(out.data().data() + static_cast<std::ptrdiff_t>(p) * channels, channels, p);
  return Tensor(std::move(out));
}

Tensor sine_pos_2d(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 4 || channels % 4 != 0) {
    throw ShapeError("sine_pos_2d: channels must be divisible by 4");
  }
  const int half = channels / 2;
  Array out(Shape{height * width, channels});
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double* row = out.data().data() + static_cast<std::ptrdiff_t>(y * width + x) * channels;
      fill_sine(row, half, x);
      fill_sine(row + half, half, y);
    }
  return Tensor(std::move(out));
}

}  // namespace cris
