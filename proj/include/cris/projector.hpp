#pragma once

#include "cris/config.hpp"
#include "cris/mask.hpp"
#include "cris/parameters.hpp"

namespace cris {

inline constexpr double kMaskThreshold = 0.35;

/// Pixel and sentence embeddings in the shared D-dimensional space.
struct Projection {
  Tensor pixels;  // z_v [N', D], N' = grid_h * grid_w on the stride-4 grid
  Tensor text;    // z_t [D]
  int grid_h = 0, grid_w = 0;
};

/// [N, C] sequence on an h x w grid -> [N * factor^2, C] after bilinear upsampling.
Tensor upsample_sequence(const Tensor& seq, int grid_h, int grid_w, int factor);

class Projector {
 public:
  Projector(ParameterStore& store, const RunConfig& config, Rng& rng);

  /// z_v = W_v Up4(F_c) + b_v per pixel, z_t = W_t F_s + b_t.
  Projection project(const Tensor& decoded, int grid_h, int grid_w, const Tensor& sentence) const;

 private:
  Tensor wv_, bv_, wt_, bt_;
};

/// z_t . z_v for every pixel, [N'].
Tensor alignment_logits(const Projection& proj);
/// sigmoid(z_t . z_v), [N'].
Tensor score_map(const Projection& proj);
/// Mean over all loss-grid pixels of -log s_i (positives) or -log(1 - s_i) (negatives).
Tensor contrastive_loss(const Projection& proj, const GroundTruthMask& gt);
/// Same per-pixel loss from precomputed logits [N'] on the loss grid.
Tensor pixel_loss(const Tensor& logits, const GroundTruthMask& gt);

/// Reshapes scores [N'] to the grid, upsamples bilinearly to out_h x out_w and
/// marks foreground where the score is strictly above the threshold.
BinaryMask predict_mask(const Tensor& scores, int grid_h, int grid_w, int out_h, int out_w,
                        double threshold = kMaskThreshold);
BinaryMask predict_mask(const Projection& proj, int out_h, int out_w, double threshold = kMaskThreshold);

/// Per-pixel affine scorer C -> 1 used when the contrastive head is ablated.
class BaselineHead {
 public:
  BaselineHead(ParameterStore& store, const RunConfig& config, Rng& rng);

  /// Logits [N'] for the 4x-upsampled decoded sequence.
  Tensor logits(const Tensor& decoded, int grid_h, int grid_w) const;

  Tensor& weight() { return w_; }
  Tensor& bias() { return b_; }

 private:
  Tensor w_, b_;
};

}  // namespace cris
