#include "cris/projector.hpp"

#include "cris/ops.hpp"

namespace cris {

Tensor upsample_sequence(const Tensor& seq, int grid_h, int grid_w, int factor) {
  return flatten_map(upsample(unflatten_map(seq, grid_h, grid_w), factor));
}

Projector::Projector(ParameterStore& store, const RunConfig& config, Rng& rng) {
  const int c = config.width, d = config.joint_width, cs = config.text_width;
  wv_ = store.add("proj.visual.w", {c, d}, Init::kFanInUniform, rng, c);
  bv_ = store.add("proj.visual.b", {d}, Init::kZeros, rng);
  // Zero text projection: every logit starts at 0, so the initial loss is ln 2.
  wt_ = store.add("proj.text.w", {cs, d}, Init::kZeros, rng);
  bt_ = store.add("proj.text.b", {d}, Init::kZeros, rng);
}

Projection Projector::project(const Tensor& decoded, int grid_h, int grid_w, const Tensor& sentence) const {
  if (sentence.shape().rank() != 1) throw ShapeError("project: sentence feature must be a vector");
  Projection p;
  p.grid_h = grid_h * 4;
  p.grid_w = grid_w * 4;
  p.pixels = linear(upsample_sequence(decoded, grid_h, grid_w, 4), wv_, bv_);
  const Tensor t = linear(reshape(sentence, Shape{1, sentence.shape()[0]}), wt_, bt_);
  p.text = reshape(t, Shape{t.shape()[1]});
  return p;
}

Tensor alignment_logits(const Projection& proj) {
  const int d = proj.text.shape()[0];
  const Tensor l = matmul(proj.pixels, reshape(proj.text, Shape{d, 1}));
  return reshape(l, Shape{l.shape()[0]});
}

Tensor score_map(const Projection& proj) { return sigmoid(alignment_logits(proj)); }

Tensor pixel_loss(const Tensor& logits, const GroundTruthMask& gt) {
  if (logits.size() != gt.loss.pixels.size()) {
    throw ShapeError("contrastive_loss: " + std::to_string(logits.size()) + " pixels vs ground truth " +
                     std::to_string(gt.loss.height) + "x" + std::to_string(gt.loss.width));
  }
  return logistic_loss(logits, gt.loss.pixels);
}

Tensor contrastive_loss(const Projection& proj, const GroundTruthMask& gt) {
  if (proj.grid_h != gt.loss.height || proj.grid_w != gt.loss.width) {
    throw ShapeError("contrastive_loss: projection grid does not match the ground-truth loss grid");
  }
  return pixel_loss(alignment_logits(proj), gt);
}

BinaryMask predict_mask(const Tensor& scores, int grid_h, int grid_w, int out_h, int out_w, double threshold) {
  if (scores.size() != static_cast<std::size_t>(grid_h) * static_cast<std::size_t>(grid_w)) {
    throw ShapeError("predict_mask: score count does not fill the grid");
  }
  const Tensor up = upsample_to(reshape(scores.detach(), Shape{1, grid_h, grid_w}), out_h, out_w);
  BinaryMask mask(out_h, out_w);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) mask.pixels[i] = up.at(i) > threshold ? 1 : 0;
  return mask;
}

BinaryMask predict_mask(const Projection& proj, int out_h, int out_w, double threshold) {
  return predict_mask(score_map(proj), proj.grid_h, proj.grid_w, out_h, out_w, threshold);
}

BaselineHead::BaselineHead(ParameterStore& store, const RunConfig& config, Rng& rng) {
  w_ = store.add("head.w", {config.width, 1}, Init::kZeros, rng);
  b_ = store.add("head.b", {1}, Init::kZeros, rng);
}

Tensor BaselineHead::logits(const Tensor& decoded, int grid_h, int grid_w) const {
  const Tensor l = linear(upsample_sequence(decoded, grid_h, grid_w, 4), w_, b_);
  return reshape(l, Shape{l.shape()[0]});
}

}  // namespace cris
