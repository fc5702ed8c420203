#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cris/tensor.hpp"

namespace cris {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +-h probes changed a ReLU activation pattern; the
  // function is not differentiable across that interval so they are not scored.
  std::size_t skipped_kinks = 0;
};

/// One scalar inside a leaf tensor.
struct Coordinate {
  Tensor tensor;
  std::size_t index;
};

/// Five-point differences (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h per coordinate against the
/// autograd gradient. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::span<const Coordinate> coords,
                                double h = 1e-5);

/// Checks every coordinate of `x` for a scalar-valued `f`.
GradCheckResult finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

double relative_error(double analytic, double numeric);

}  // namespace cris
