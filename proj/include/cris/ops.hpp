#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cris/tensor.hpp"

// Differentiable tensor operations. Every op records its backward rule when any
// input requires grad; all gradients are exact.
namespace cris {

// Linear algebra --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
/// x[n,in] * w[in,out] + bias[out]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor transpose(const Tensor& x);  // rank-2 only
Tensor reshape(const Tensor& x, Shape shape);

/// Cross-correlation of x[C_in,H,W] with w[C_out,C_in,kh,kw], kh,kw in {1,3}.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);

// Elementwise -----------------------------------------------------------------

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// map[C,H,W] scaled per channel by vec[C].
Tensor mul_channels(const Tensor& map, const Tensor& vec);
Tensor scale(const Tensor& x, double factor);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Reductions and normalization ------------------------------------------------

Tensor softmax(const Tensor& x, int axis);
/// Row softmax of scores[q,k]. Keys with key_mask[k] == true and, when causal,
/// keys k > q receive exactly zero weight. Every row must keep one key.
Tensor masked_softmax(const Tensor& scores, std::span<const std::uint8_t> key_mask, bool causal);
/// Normalizes each vector along the last axis, epsilon 1e-5 inside the root.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean over pixels of softplus(-x) for positives and softplus(x) for negatives,
/// i.e. binary cross-entropy on sigmoid(x) without evaluating log of a sigmoid.
Tensor logistic_loss(const Tensor& logits, std::span<const std::uint8_t> positive);

// Resampling on [C,H,W] maps -----------------------------------------------------

Tensor avgpool2(const Tensor& x);
/// Bilinear interpolation with corner-aligned sampling.
Tensor upsample_to(const Tensor& x, int out_h, int out_w);
Tensor upsample(const Tensor& x, int factor);

enum class Resample { kAvgPool2, kUp2, kUp4 };
Tensor resample(const Tensor& x, Resample mode);

// Indexing ----------------------------------------------------------------------

/// Columns [begin, begin+count) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, int begin, int count);
/// Rows of table[V,C] picked by ids, as [ids.size(), C].
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
/// Row `index` of a rank-2 tensor as a rank-1 tensor.
Tensor select_row(const Tensor& x, int index);

// [C,H,W] <-> [H*W, C] with row-major cell order.
Tensor flatten_map(const Tensor& map);
Tensor unflatten_map(const Tensor& seq, int height, int width);

namespace testing {

// Fault injection for negative-control gradient checks. Process-wide.
enum class Fault { kNone, kSigmoidDerivative };
void set_fault(Fault fault);
Fault fault();

// Observer for ReLU activation patterns; a finite-difference probe uses it to
// detect that a perturbation crossed a kink.
class ActivationPattern {
 public:
  ActivationPattern();
  ~ActivationPattern();
  ActivationPattern(const ActivationPattern&) = delete;
  ActivationPattern& operator=(const ActivationPattern&) = delete;

  void record(std::span<const double> pre_activation);
  std::vector<bool> take();

 private:
  ActivationPattern* previous_;
  std::vector<bool> bits_;
};

}  // namespace testing

}  // namespace cris
