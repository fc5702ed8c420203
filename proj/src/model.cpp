#include "cris/model.hpp"

#include "cris/ops.hpp"

namespace cris {

namespace {

const RunConfig& validated(const RunConfig& c) {
  c.validate();
  return c;
}

}  // namespace

CrisModel::CrisModel(RunConfig config, Vocab vocab)
    : config_(validated(config)),
      vocab_(std::move(vocab)),
      rng_(config_.seed),
      text_(params_, config_, vocab_.size(), rng_),
      image_(params_, config_, rng_),
      neck_(params_, config_, rng_) {
  if (config_.ablation.dec) decoder_.emplace(params_, config_, rng_);
  if (config_.ablation.con) {
    projector_.emplace(params_, config_, rng_);
  } else {
    head_.emplace(params_, config_, rng_);
  }
}

ForwardResult CrisModel::forward(const Tensor& image, const TokenSeq& tokens) const {
  const TextFeatures text = text_.encode(tokens);
  const FeaturePyramid pyramid = image_.encode(image);
  const NeckOutput neck = neck_.forward(pyramid, text.global);
  const Tensor decoded = decoder_ ? decoder_->decode(neck.sequence, neck.grid_h, neck.grid_w, text) : neck.sequence;
  ForwardResult out;
  out.grid_h = neck.grid_h * 4;
  out.grid_w = neck.grid_w * 4;
  if (projector_) {
    out.logits = alignment_logits(projector_->project(decoded, neck.grid_h, neck.grid_w, text.global));
  } else {
    out.logits = head_->logits(decoded, neck.grid_h, neck.grid_w);
  }
  return out;
}

Tensor CrisModel::loss(const Tensor& image, const TokenSeq& tokens, const GroundTruthMask& gt) const {
  return pixel_loss(forward(image, tokens).logits, gt);
}

BinaryMask CrisModel::predict(const Tensor& image, const TokenSeq& tokens, double threshold) const {
  NoGradGuard no_grad;
  const ForwardResult f = forward(image, tokens);
  return predict_mask(sigmoid(f.logits), f.grid_h, f.grid_w, image.shape()[1], image.shape()[2], threshold);
}

}  // namespace cris
