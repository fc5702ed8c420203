#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cris/grad_check.hpp"

namespace cris {

inline constexpr double kGradTolerance = 1e-6;

struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;

  double worst() const;
  const GradSuiteEntry* worst_entry() const;
  std::size_t checked() const;
  std::size_t skipped() const;
  bool passed(double tolerance = kGradTolerance) const { return worst() < tolerance; }
  void append(const GradSuiteReport& other);
};

/// Every differentiable op on small random tensors.
GradSuiteReport run_op_suite(std::uint64_t seed);
/// Full desk model loss (all modules on) w.r.t. a stratified sample of at least
/// `min_coordinates` parameter scalars, a few from every tensor.
GradSuiteReport run_model_suite(std::uint64_t seed, std::size_t min_coordinates = 256);
GradSuiteReport run_grad_suite(std::uint64_t seed);

}  // namespace cris
