#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cris/metrics.hpp"
#include "cris/model.hpp"
#include "cris/synth_data.hpp"

namespace cris {

/// A sample converted once into model inputs.
struct PreparedSample {
  std::string id;
  Tensor image;
  TokenSeq tokens;
  GroundTruthMask gt;
};

/// Throws DataError when an image does not match the configured size.
std::vector<PreparedSample> prepare(const CrisModel& model, std::span<const Sample> samples);

/// Word vocabulary of every expression in the samples.
Vocab build_vocab(std::span<const Sample> samples);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

/// The last `val_count` samples validate (10% when val_count is 0).
Split split_dataset(std::vector<Sample> samples, int val_count);

/// Step schedule: lr, times decay_factor from epoch decay_epoch on (epochs count from 1).
double learning_rate(const OptimizerConfig& opt, int epoch);

/// Predicts each sample at full resolution and aggregates IoU statistics.
EvalReport evaluate_dataset(const CrisModel& model, std::span<const PreparedSample> samples);
EvalReport evaluate_dataset(const CrisModel& model, std::span<const Sample> samples);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_mean_iou = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_mean_iou = -1;
};

/// Path of the best-validation checkpoint written next to `out_ckpt`.
std::filesystem::path best_checkpoint_path(const std::filesystem::path& out_ckpt);

/// Seeded training. After every epoch the current model is saved to out_ckpt
/// and, on a new best validation mean IoU, to best_checkpoint_path(out_ckpt).
/// A non-finite loss throws NumericError and leaves the last saved checkpoints intact.
TrainResult train(const RunConfig& config, std::vector<Sample> samples, const std::filesystem::path& out_ckpt,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace cris
