#include "cris/parameters.hpp"

#include <cmath>

namespace cris {

Tensor ParameterStore::add(const std::string& name, Shape shape, Init init, Rng& rng, int fan_in) {
  Array value(shape);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      for (double& v : value.data()) v = 1.0;
      break;
    case Init::kFanInUniform: {
      const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
      for (double& v : value.data()) v = rng.uniform(-bound, bound);
      break;
    }
    case Init::kEmbedding:
      for (double& v : value.data()) v = rng.uniform(-0.1, 0.1);
      break;
  }
  return add(name, std::move(value));
}

Tensor ParameterStore::add(const std::string& name, Array value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Parameter p;
  p.name = name;
  p.tensor = Tensor(std::move(value), true);
  p.adam_m.assign(p.tensor.size(), 0.0);
  p.adam_v.assign(p.tensor.size(), 0.0);
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return params_.back().tensor;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return params_[it->second];
}

Parameter& ParameterStore::at(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const ParameterStore&>(*this).at(name));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void ParameterStore::adam_step(const AdamOptions& o) {
  for (auto& p : params_) {
    if (!p.tensor.has_grad()) throw Error("adam_step: parameter '" + p.name + "' has no gradient");
  }
  for (auto& p : params_) {
    ++p.step_count;
    const double t = static_cast<double>(p.step_count);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    auto grad = p.tensor.grad();
    auto w = p.tensor.mutable_value().data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = grad[i];
      p.adam_m[i] = o.beta1 * p.adam_m[i] + (1.0 - o.beta1) * g;
      p.adam_v[i] = o.beta2 * p.adam_v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = p.adam_m[i] / c1;
      const double v_hat = p.adam_v[i] / c2;
      w[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
    check_finite(w, "adam_step");
    p.tensor.zero_grad();
  }
}

}  // namespace cris
