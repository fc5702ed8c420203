#include "cris/workflow.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "cris/checkpoint.hpp"
#include "cris/ops.hpp"

namespace cris {

std::vector<PreparedSample> prepare(const CrisModel& model, std::span<const Sample> samples) {
  const int size = model.config().image_size;
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    if (s.image.height != size || s.image.width != size) {
      throw DataError("sample " + s.id + ": image is " + std::to_string(s.image.height) + "x" +
                      std::to_string(s.image.width) + ", config expects " + std::to_string(size) + "x" +
                      std::to_string(size));
    }
    try {
      out.push_back({s.id, image_tensor(s.image), model.tokenize(s.expr), GroundTruthMask::from_full(s.mask, size / 4, size / 4)});
    } catch (const DataError& e) {
      throw DataError("sample " + s.id + ": " + e.what());
    }
  }
  return out;
}

Vocab build_vocab(std::span<const Sample> samples) {
  std::vector<std::string> corpus;
  corpus.reserve(samples.size());
  for (const Sample& s : samples) corpus.push_back(s.expr);
  return Vocab::build(corpus);
}

Split split_dataset(std::vector<Sample> samples, int val_count) {
  const std::size_t n = samples.size();
  const std::size_t v = val_count > 0 ? static_cast<std::size_t>(val_count) : n / 10;
  if (v == 0 || v >= n) {
    throw DataError("cannot split " + std::to_string(n) + " samples into train and " + std::to_string(v) + " validation");
  }
  Split split;
  split.val.assign(std::make_move_iterator(samples.end() - static_cast<std::ptrdiff_t>(v)), std::make_move_iterator(samples.end()));
  samples.resize(n - v);
  split.train = std::move(samples);
  return split;
}

double learning_rate(const OptimizerConfig& opt, int epoch) {
  return epoch >= opt.decay_epoch ? opt.lr * opt.decay_factor : opt.lr;
}

EvalReport evaluate_dataset(const CrisModel& model, std::span<const PreparedSample> samples) {
  std::vector<Overlap> overlaps;
  overlaps.reserve(samples.size());
  for (const PreparedSample& s : samples) {
    try {
      overlaps.push_back(overlap(model.predict(s.image, s.tokens), s.gt.full));
    } catch (const Error& e) {
      throw DataError("sample " + s.id + ": " + e.what());
    }
  }
  return summarize(overlaps);
}

EvalReport evaluate_dataset(const CrisModel& model, std::span<const Sample> samples) {
  const std::vector<PreparedSample> prepared = prepare(model, samples);
  return evaluate_dataset(model, std::span<const PreparedSample>(prepared));
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch}, {"lr", lr}, {"train_loss", train_loss}, {"val_mean_iou", val_mean_iou}};
}

std::filesystem::path best_checkpoint_path(const std::filesystem::path& out_ckpt) {
  std::filesystem::path p = out_ckpt;
  p.replace_extension(".best" + out_ckpt.extension().string());
  return p;
}

TrainResult train(const RunConfig& config, std::vector<Sample> samples, const std::filesystem::path& out_ckpt,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  std::vector<std::string> corpus;
  for (const Sample& s : samples) corpus.push_back(s.expr);
  // Augmented expressions may use words the corpus lacks.
  if (config.augment) corpus.push_back("red green blue yellow left right");
  const Vocab vocab = Vocab::build(corpus);
  const Split split = split_dataset(std::move(samples), config.val_count);
  CrisModel model(config, vocab);
  std::vector<PreparedSample> train_set = prepare(model, split.train);
  const std::vector<PreparedSample> val_set = prepare(model, split.val);

  // Separate stream so the shuffle order does not depend on how many draws initialization made.
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng augment_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const OptimizerConfig& opt = config.optimizer;
  const std::size_t batch = static_cast<std::size_t>(opt.batch_size);
  TrainResult result;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.below(i + 1)]);
    if (config.augment) {
      for (std::size_t i = 0; i < split.train.size(); ++i) {
        std::array<int, 4> perm{0, 1, 2, 3};
        for (std::size_t k = perm.size() - 1; k > 0; --k) std::swap(perm[k], perm[augment_rng.below(k + 1)]);
        Sample s = recolor_sample(split.train[i], perm);
        if (augment_rng.below(2)) s = mirror_sample(s);
        train_set[i] = prepare(model, std::span<const Sample>(&s, 1)).front();
      }
    }
    AdamOptions adam;
    adam.lr = learning_rate(opt, epoch);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const PreparedSample& s = train_set[order[k]];
        const Tensor loss = model.loss(s.image, s.tokens, s.gt);
        const double value = loss.item();
        if (!std::isfinite(value)) throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        loss_sum += value;
        scale(loss, weight).backward();
      }
      model.parameters().adam_step(adam);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = adam.lr;
    entry.train_loss = loss_sum / static_cast<double>(train_set.size());
    entry.val_mean_iou = evaluate_dataset(model, std::span<const PreparedSample>(val_set)).mean_iou;
    save_checkpoint(model, out_ckpt);
    if (entry.val_mean_iou > result.best_val_mean_iou) {
      result.best_val_mean_iou = entry.val_mean_iou;
      result.best_epoch = epoch;
      save_checkpoint(model, best_checkpoint_path(out_ckpt));
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

}  // namespace cris
