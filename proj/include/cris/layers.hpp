#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cris/parameters.hpp"
#include "cris/tensor.hpp"

// Transformer building blocks shared by the text encoder and the
// vision-language decoder.
namespace cris {

struct LayerNormParams {
  Tensor gain, bias;
  static LayerNormParams create(ParameterStore& store, const std::string& prefix, int width, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

/// Per-token linear maps to Q, K, V and the output projection after the
/// heads are concatenated. Weights are [in, out]. Keys carry no bias: a shared
/// shift of every key score cancels in the softmax.
struct AttentionParams {
  Tensor wq, bq, wk, wv, bv, wo, bo;
  static AttentionParams create(ParameterStore& store, const std::string& prefix, int width, Rng& rng);
};

/// Attention weights of every head, captured for inspection.
struct AttentionTrace {
  std::vector<Tensor> weights;  // one [queries, keys] matrix per head
};

/// softmax(Q K^T / sqrt(d_k)) V per head over Q = q_in Wq, K = k_in Wk, V = v_in Wv,
/// then concatenated and output-projected.
Tensor multi_head_attention(const AttentionParams& p, const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                            int heads, std::span<const std::uint8_t> key_mask, bool causal,
                            AttentionTrace* trace = nullptr);

/// Self-attention; `pos` (may be undefined) is added to the query and key inputs only.
Tensor mhsa(const Tensor& x, const AttentionParams& p, int heads, const Tensor& pos, bool causal = false,
            AttentionTrace* trace = nullptr);

/// Cross-attention from visual queries to text keys/values. PAD keys get zero weight.
Tensor mhca(const Tensor& x, const Tensor& text, std::span<const std::uint8_t> pad_mask, const AttentionParams& p,
            int heads, const Tensor& pos_q, const Tensor& pos_k, AttentionTrace* trace = nullptr);

/// linear(C -> hidden) + ReLU + linear(hidden -> C)
struct MlpParams {
  Tensor w1, b1, w2, b2;
  static MlpParams create(ParameterStore& store, const std::string& prefix, int width, int hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

/// Fixed sinusoidal encodings. Channel 2i holds sin(p / 10000^(2i/d)), channel
/// 2i+1 the matching cos, where d is the number of channels encoding p.
Tensor sine_pos_1d(int length, int channels);
/// First half of the channels encodes the column, second half the row; cells
/// are in row-major order.
Tensor sine_pos_2d(int height, int width, int channels);

}  // namespace cris
