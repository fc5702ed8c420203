#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cris/mask.hpp"

namespace cris {

inline constexpr std::array<int, 5> kPrecisionThresholds{50, 60, 70, 80, 90};

struct Overlap {
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

Overlap overlap(const BinaryMask& pred, const BinaryMask& gt);
/// |pred & gt| / |pred | gt|, 1 when both masks are empty.
double iou(const BinaryMask& pred, const BinaryMask& gt);
/// Percentage of ious strictly above x.
double precision_at(std::span<const double> ious, double x);

struct EvalReport {
  double mean_iou = 0;
  double overall_iou = 0;
  std::array<double, 5> pr_at{};  // percentages, indexed like kPrecisionThresholds
  std::size_t count = 0;

  nlohmann::json to_json() const;
};

/// Aggregates per-sample overlaps into a report.
EvalReport summarize(std::span<const Overlap> overlaps);

}  // namespace cris
