#pragma once

#include <utility>

#include "cris/config.hpp"
#include "cris/image_encoder.hpp"
#include "cris/parameters.hpp"

namespace cris {

struct NeckOutput {
  Tensor m4, m3, m2;  // [C, H/16, W/16]
  Tensor fused;       // F_m [C, H/16, W/16]
  Tensor coord;       // [2, H/16, W/16], x then y, each linspace(-1, 1)
  Tensor sequence;    // F_v [N, C], N = (H/16)(W/16), row-major cells
  int grid_h = 0, grid_w = 0;
};

/// Fuses the visual pyramid with the sentence feature on the stride-16 grid.
/// Every 1x1 map is a per-pixel linear layer with a zero-initialized bias.
class CrossModalNeck {
 public:
  CrossModalNeck(ParameterStore& store, const RunConfig& config, Rng& rng);

  /// Up2(relu(W_v4 F_v4) * relu(W_s F_s)), the text vector broadcast over the grid.
  Tensor fuse_stage4(const Tensor& v4, const Tensor& sentence) const;
  /// F_m3 = [relu(W_m4 F_m4), relu(W_v3 F_v3)], F_m2 = [relu(W_m3 F_m3), relu(W_v2 avgpool2(F_v2))].
  std::pair<Tensor, Tensor> fuse_lower(const Tensor& m4, const Tensor& v3, const Tensor& v2) const;
  /// F_m = conv1x1([F_m2, F_m3, F_m4]); F_v = flatten(conv3x3([F_m, F_coord])).
  NeckOutput aggregate_and_flatten(const Tensor& m2, const Tensor& m3, const Tensor& m4) const;

  NeckOutput forward(const FeaturePyramid& pyramid, const Tensor& sentence) const;

 private:
  int width_;
  Tensor wv4_, bv4_, ws_, bs_;
  Tensor wm4_, bm4_, wv3_, bv3_, wm3_, bm3_, wv2_, bv2_;
  Tensor agg_w_, agg_b_, coord_w_, coord_b_;
};

/// Two-channel coordinate map, channel 0 = x, channel 1 = y, corners at (-1,-1) and (1,1).
Tensor coord_features(int height, int width);

}  // namespace cris
