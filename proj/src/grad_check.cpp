#include "cris/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "cris/ops.hpp"

namespace cris {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::span<const Coordinate> coords,
                                double h) {
  for (const Coordinate& c : coords) {
    if (!c.tensor.requires_grad()) throw Error("check_gradients: coordinate tensor does not require grad");
    if (c.index >= c.tensor.size()) throw ShapeError("check_gradients: coordinate index out of range");
    c.tensor.zero_grad();
  }

  std::vector<bool> base_pattern;
  {
    testing::ActivationPattern pattern;
    Tensor loss = loss_fn();
    if (loss.size() != 1) throw ShapeError("check_gradients: loss must be scalar");
    loss.backward();
    base_pattern = pattern.take();
  }
  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (const Coordinate& c : coords) analytic.push_back(c.tensor.grad()[c.index]);

  auto probe = [&](Coordinate c, double value, bool& kink) {
    Tensor t = c.tensor;
    t.mutable_value()[c.index] = value;
    testing::ActivationPattern pattern;
    const double f = loss_fn().item();
    if (pattern.take() != base_pattern) kink = true;
    return f;
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Coordinate& c = coords[i];
    const double original = c.tensor.at(c.index);
    bool kink = false;
    const double fp2 = probe(c, original + 2 * h, kink);
    const double fp1 = probe(c, original + h, kink);
    const double fm1 = probe(c, original - h, kink);
    const double fm2 = probe(c, original - 2 * h, kink);
    Tensor t = c.tensor;
    t.mutable_value()[c.index] = original;
    if (kink) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i], numeric));
    ++result.checked;
  }
  return result;
}

GradCheckResult finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor leaf = x.requires_grad() ? x : Tensor(x.value(), true);
  std::vector<Coordinate> coords;
  coords.reserve(leaf.size());
  for (std::size_t i = 0; i < leaf.size(); ++i) coords.push_back({leaf, i});
  return check_gradients([&] { return f(leaf); }, coords, h);
}

}  // namespace cris
