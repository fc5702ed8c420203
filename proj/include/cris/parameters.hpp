#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cris/random.hpp"
#include "cris/tensor.hpp"

namespace cris {

struct Parameter {
  std::string name;
  Tensor tensor;  // requires_grad leaf
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;
};

enum class Init {
  kZeros,
  kOnes,
  kFanInUniform,  // U(-sqrt(3/fan_in), sqrt(3/fan_in)): unit-variance preserving
  kEmbedding,     // U(-0.1, 0.1)
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named parameter registry in creation order. Names are unique.
class ParameterStore {
 public:
  /// `fan_in` is only read by kFanInUniform.
  Tensor add(const std::string& name, Shape shape, Init init, Rng& rng, int fan_in = 1);
  Tensor add(const std::string& name, Array value);

  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  void zero_grad();
  /// Bias-corrected Adam update of every parameter, then zeroes gradients.
  void adam_step(const AdamOptions& options);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace cris
