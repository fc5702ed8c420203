#include "cris/metrics.hpp"

#include "cris/tensor.hpp"

namespace cris {

Overlap overlap(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("iou: mask sizes differ (" + std::to_string(pred.height) + "x" + std::to_string(pred.width) + " vs " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width) + ")");
  }
  Overlap o;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool p = pred.pixels[i] != 0, g = gt.pixels[i] != 0;
    o.intersection += p && g;
    o.union_ += p || g;
  }
  return o;
}

namespace {

double ratio(const Overlap& o) {
  return o.union_ == 0 ? 1.0 : static_cast<double>(o.intersection) / static_cast<double>(o.union_);
}

}  // namespace

double iou(const BinaryMask& pred, const BinaryMask& gt) { return ratio(overlap(pred, gt)); }

double precision_at(std::span<const double> ious, double x) {
  if (ious.empty()) throw DataError("precision_at: empty IoU list");
  std::size_t hits = 0;
  for (double v : ious) hits += v > x;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ious.size());
}

EvalReport summarize(std::span<const Overlap> overlaps) {
  if (overlaps.empty()) throw DataError("cannot summarize an empty evaluation");
  EvalReport r;
  r.count = overlaps.size();
  std::vector<double> ious;
  std::size_t inter = 0, uni = 0;
  for (const Overlap& o : overlaps) {
    ious.push_back(ratio(o));
    inter += o.intersection;
    uni += o.union_;
  }
  double sum = 0;
  for (double v : ious) sum += v;
  r.mean_iou = sum / static_cast<double>(ious.size());
  r.overall_iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) {
    r.pr_at[i] = precision_at(ious, kPrecisionThresholds[i] / 100.0);
  }
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json pr = nlohmann::json::object();
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) pr[std::to_string(kPrecisionThresholds[i])] = pr_at[i];
  return {{"mean_iou", mean_iou}, {"overall_iou", overall_iou}, {"pr", pr}, {"count", count}};
}

}  // namespace cris
