#pragma once

#include <vector>

#include "cris/config.hpp"
#include "cris/layers.hpp"
#include "cris/text_encoder.hpp"

namespace cris {

/// Per-layer attention weights recorded during decode.
struct DecoderTrace {
  std::vector<AttentionTrace> self_attention;
  std::vector<AttentionTrace> cross_attention;
};

/// n pre-norm layers of self-attention over the visual sequence, cross-attention
/// into the text tokens, and an MLP, each wrapped in a residual connection.
class VisionLanguageDecoder {
 public:
  VisionLanguageDecoder(ParameterStore& store, const RunConfig& config, Rng& rng);

  /// Sine position encodings are computed once and added to the attention
  /// query/key inputs of the first layer; the residual stream never carries them.
  Tensor decode(const Tensor& visual, int grid_h, int grid_w, const TextFeatures& text, DecoderTrace* trace = nullptr,
                bool use_positions = true) const;

  /// Zeroes every attention and MLP output projection.
  void zero_output_projections();

  int layers() const { return static_cast<int>(layers_.size()); }

 private:
  struct Layer {
    LayerNormParams ln_self;
    AttentionParams self_attn;
    LayerNormParams ln_cross;
    AttentionParams cross_attn;
    LayerNormParams ln_mlp;
    MlpParams mlp;
  };
  int width_;
  int heads_;
  std::vector<Layer> layers_;
};

}  // namespace cris
