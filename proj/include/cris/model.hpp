#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include "cris/config.hpp"
#include "cris/decoder.hpp"
#include "cris/image_encoder.hpp"
#include "cris/mask.hpp"
#include "cris/neck.hpp"
#include "cris/projector.hpp"
#include "cris/text_encoder.hpp"

namespace cris {

struct ForwardResult {
  Tensor logits;  // [N'] on the stride-4 grid
  int grid_h = 0, grid_w = 0;
};

/// Full referring-segmentation network. With ablation.dec off the decoder is
/// skipped (F_c = F_v) and owns no parameters; with ablation.con off the
/// projectors are replaced by a per-pixel scorer.
class CrisModel {
 public:
  /// Parameters are initialized from config.seed.
  CrisModel(RunConfig config, Vocab vocab);
  CrisModel(const CrisModel&) = delete;
  CrisModel& operator=(const CrisModel&) = delete;

  const RunConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  TokenSeq tokenize(std::string_view expr) const { return cris::tokenize(expr, vocab_, config_.max_len); }

  ForwardResult forward(const Tensor& image, const TokenSeq& tokens) const;
  Tensor loss(const Tensor& image, const TokenSeq& tokens, const GroundTruthMask& gt) const;
  BinaryMask predict(const Tensor& image, const TokenSeq& tokens, double threshold = kMaskThreshold) const;

  const TextEncoder& text_encoder() const { return text_; }
  const ImageEncoder& image_encoder() const { return image_; }
  const CrossModalNeck& neck() const { return neck_; }
  VisionLanguageDecoder* decoder() { return decoder_ ? &*decoder_ : nullptr; }
  const Projector* projector() const { return projector_ ? &*projector_ : nullptr; }

 private:
  RunConfig config_;
  Vocab vocab_;
  ParameterStore params_;
  Rng rng_;
  TextEncoder text_;
  ImageEncoder image_;
  CrossModalNeck neck_;
  std::optional<VisionLanguageDecoder> decoder_;
  std::optional<Projector> projector_;
  std::optional<BaselineHead> head_;
};

}  // namespace cris
