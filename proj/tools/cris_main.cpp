#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cris/checkpoint.hpp"
#include "cris/grad_suite.hpp"
#include "cris/image_io.hpp"
#include "cris/ops.hpp"
#include "cris/synth_data.hpp"
#include "cris/workflow.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

using namespace cris;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

struct TrainArgs {
  std::string data, out, config, profile, log;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, val_count, layers, batch;
  std::optional<double> lr;
  bool no_con = false, no_dec = false, no_augment = false;
};

int run_train(const TrainArgs& a) {
  RunConfig config = a.config.empty() ? RunConfig::for_profile(a.profile.empty() ? "desk" : a.profile)
                                      : config_from_json(read_json_file(a.config));
  if (!a.config.empty() && !a.profile.empty()) throw ConfigError("--profile and --config are mutually exclusive");
  if (a.seed) config.seed = *a.seed;
  if (a.epochs) config.optimizer.epochs = *a.epochs;
  if (a.batch) config.optimizer.batch_size = *a.batch;
  if (a.lr) config.optimizer.lr = *a.lr;
  if (a.val_count) config.val_count = *a.val_count;
  if (a.layers) config.decoder.n_layers = *a.layers;
  if (a.no_con) config.ablation.con = false;
  if (a.no_dec) config.ablation.dec = false;
  if (a.no_augment) config.augment = false;
  config.validate();

  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::trunc);
    if (!log_file) throw DataError("cannot write log " + a.log);
  }
  const TrainResult result = train(config, load_dataset(a.data), a.out, [&](const EpochLog& e) {
    const std::string line = e.to_json().dump();
    std::cout << line << std::endl;
    if (log_file) log_file << line << '\n' << std::flush;
  });
  std::cerr << "best val mean IoU " << result.best_val_mean_iou << " at epoch " << result.best_epoch << "\n";
  return kExitOk;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& split, const std::string& report_path) {
  const auto model = load_checkpoint(ckpt);
  std::vector<Sample> samples = load_dataset(data);
  if (split != "all") {
    Split s = split_dataset(std::move(samples), model->config().val_count);
    samples = split == "val" ? std::move(s.val) : std::move(s.train);
  }
  const std::string text = evaluate_dataset(*model, std::span<const Sample>(samples)).to_json().dump();
  std::cout << text << std::endl;
  const std::string out = report_path.empty() ? ckpt + ".eval.json" : report_path;
  write_file(out, std::vector<std::uint8_t>(text.begin(), text.end()));
  return kExitOk;
}

int run_predict(const std::string& ckpt, const std::string& image_path, const std::string& expr, const std::string& out) {
  const auto model = load_checkpoint(ckpt);
  const RgbImage image = decode_ppm(read_file(image_path));
  if (image.height % 32 != 0 || image.width % 32 != 0) {
    throw DataError("image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                    "; both sides must be multiples of 32");
  }
  const BinaryMask mask = model->predict(image_tensor(image), model->tokenize(expr));
  write_file(out, encode_mask(mask));
  return kExitOk;
}

int run_grad_check(std::uint64_t seed, const std::string& fault) {
  if (fault == "sigmoid") {
    testing::set_fault(testing::Fault::kSigmoidDerivative);
  } else if (!fault.empty()) {
    throw ConfigError("unknown fault '" + fault + "'");
  }
  const GradSuiteReport ops = run_op_suite(seed);
  const GradSuiteReport model = run_model_suite(seed);
  for (const auto* part : {&ops, &model}) {
    const GradSuiteEntry* w = part->worst_entry();
    nlohmann::json line = {{"suite", part == &ops ? "ops" : "model"},
                           {"checked", part->checked()},
                           {"skipped_kinks", part->skipped()},
                           {"worst_rel_error", part->worst()},
                           {"worst_at", w ? w->name : ""}};
    std::cout << line.dump() << "\n";
  }
  const double worst = std::max(ops.worst(), model.worst());
  const bool pass = worst < kGradTolerance;
  std::printf("worst relative error %.3e (tolerance %.0e): %s\n", worst, kGradTolerance, pass ? "PASS" : "FAIL");
  return pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Referring image segmentation with text-to-pixel contrastive alignment"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic referring-segmentation dataset");
  std::string gen_out;
  int gen_count = 0, gen_size = 64;
  std::uint64_t gen_seed = 7;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "Image side in pixels (multiple of 32)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a model and write checkpoints");
  TrainArgs ta;
  tr->add_option("--data", ta.data, "Dataset directory")->required();
  tr->add_option("--out", ta.out, "Checkpoint path; the best-validation model goes to <stem>.best<ext>")->required();
  tr->add_option("--config", ta.config, "RunConfig JSON file");
  tr->add_option("--profile", ta.profile, "desk or paper defaults");
  tr->add_option("--seed", ta.seed, "Initialization and shuffling seed");
  tr->add_option("--epochs", ta.epochs, "Override optimizer.epochs");
  tr->add_option("--batch-size", ta.batch, "Override optimizer.batch_size");
  tr->add_option("--lr", ta.lr, "Override optimizer.lr");
  tr->add_option("--val-count", ta.val_count, "Validation samples taken from the end (0: last 10%)");
  tr->add_option("--decoder-layers", ta.layers, "Override decoder.n_layers");
  tr->add_flag("--no-con", ta.no_con, "Replace the contrastive projectors with a per-pixel scorer");
  tr->add_flag("--no-dec", ta.no_dec, "Skip the vision-language decoder");
  tr->add_flag("--no-augment", ta.no_augment, "Train on the samples as stored, without mirroring or recoloring");
  tr->add_option("--log", ta.log, "Also write the JSON lines log to this file");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_split = "all", ev_report;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--split", ev_split, "all, train or val")->check(CLI::IsMember({"all", "train", "val"}))->capture_default_str();
  ev->add_option("--report", ev_report, "Report path (default <ckpt>.eval.json)");

  auto* pr = app.add_subcommand("predict", "Segment the referent of an expression in one image");
  std::string pr_ckpt, pr_image, pr_expr, pr_out;
  pr->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  pr->add_option("--image", pr_image, "Input PPM image")->required();
  pr->add_option("--expr", pr_expr, "Referring expression")->required();
  pr->add_option("--out", pr_out, "Output PGM mask")->required();

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every op and the full model");
  std::uint64_t gc_seed = 7;
  std::string gc_fault;
  gc->add_option("--seed", gc_seed, "Seed for tensors, model and scene")->capture_default_str();
  gc->add_option("--inject-fault", gc_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      const auto records = generate_dataset(gen_count, gen_size, gen_seed, gen_out);
      std::cout << nlohmann::json{{"out", gen_out}, {"count", records.size()}}.dump() << "\n";
      return kExitOk;
    }
    if (*tr) return run_train(ta);
    if (*ev) return run_eval(ev_ckpt, ev_data, ev_split, ev_report);
    if (*pr) return run_predict(pr_ckpt, pr_image, pr_expr, pr_out);
    if (*gc) return run_grad_check(gc_seed, gc_fault);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
