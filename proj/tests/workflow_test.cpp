#include <gtest/gtest.h>

#include <filesystem>

#include <unistd.h>

#include "cris/checkpoint.hpp"
#include "cris/grad_suite.hpp"
#include "cris/image_io.hpp"
#include "cris/ops.hpp"
#include "cris/workflow.hpp"

namespace cris {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cris_wf_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Schedule, StepDecay) {
  OptimizerConfig opt;
  opt.lr = 1e-3;
  opt.decay_factor = 0.1;
  opt.decay_epoch = 3;
  EXPECT_EQ(learning_rate(opt, 1), 1e-3);
  EXPECT_EQ(learning_rate(opt, 2), 1e-3);
  EXPECT_EQ(learning_rate(opt, 3), 1e-3 * 0.1);
  EXPECT_EQ(learning_rate(opt, 40), 1e-3 * 0.1);
}

std::vector<Sample> numbered(int n) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) out.push_back({std::to_string(i), RgbImage(1, 1), BinaryMask(1, 1), "red circle"});
  return out;
}

TEST(Split, TakesTheTail) {
  const Split a = split_dataset(numbered(30), 0);
  ASSERT_EQ(a.val.size(), 3u);
  EXPECT_EQ(a.val.front().id, "27");
  EXPECT_EQ(a.train.back().id, "26");
  const Split b = split_dataset(numbered(30), 12);
  EXPECT_EQ(b.train.size(), 18u);
  EXPECT_THROW(split_dataset(numbered(30), 30), DataError);
  EXPECT_THROW(split_dataset(numbered(5), 0), DataError);
}

TEST(Prepare, WrongImageSizeNamesSample) {
  const std::vector<std::string> corpus{"red circle"};
  const CrisModel model(RunConfig::desk(), Vocab::build(corpus));
  std::vector<Sample> samples{{"s9", RgbImage(32, 32), BinaryMask(32, 32), "red circle"}};
  try {
    prepare(model, samples);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("s9"), std::string::npos);
  }
}

RunConfig tiny_config() {
  RunConfig c = RunConfig::desk();
  c.optimizer.epochs = 2;
  c.optimizer.batch_size = 4;
  c.val_count = 4;
  return c;
}

TEST(Train, IdenticalRunsAreByteIdentical) {
  const fs::path dir = scratch("det");
  generate_dataset(16, 64, 7, dir / "data");
  std::vector<std::string> logs[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("run" + std::to_string(run) + ".ckpt");
    const TrainResult r = train(tiny_config(), load_dataset(dir / "data"), out,
                                [&](const EpochLog& e) { logs[run].push_back(e.to_json().dump()); });
    EXPECT_EQ(r.log.size(), 2u);
    EXPECT_TRUE(fs::exists(best_checkpoint_path(out)));
    EXPECT_GE(r.best_epoch, 1);
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(read_file(dir / "run0.ckpt"), read_file(dir / "run1.ckpt"));
  EXPECT_EQ(read_file(dir / "run0.best.ckpt"), read_file(dir / "run1.best.ckpt"));
  fs::remove_all(dir);
}

TEST(Train, SeedChangesTheRun) {
  const fs::path dir = scratch("seed");
  generate_dataset(16, 64, 7, dir / "data");
  RunConfig other = tiny_config();
  other.seed = 8;
  train(tiny_config(), load_dataset(dir / "data"), dir / "a.ckpt");
  train(other, load_dataset(dir / "data"), dir / "b.ckpt");
  EXPECT_NE(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
  fs::remove_all(dir);
}

TEST(Train, AugmentedVocabularyCoversSwappedWords) {
  const fs::path dir = scratch("vocab");
  generate_dataset(12, 64, 7, dir / "data");
  RunConfig c = tiny_config();
  c.optimizer.epochs = 1;
  train(c, load_dataset(dir / "data"), dir / "m.ckpt");
  const auto model = load_checkpoint(dir / "m.ckpt");
  EXPECT_NO_THROW(model->tokenize("red green blue yellow left right"));
  fs::remove_all(dir);
}

TEST(GradSuite, PassesAndCatchesCorruptedDerivative) {
  const GradSuiteReport report = run_grad_suite(7);
  EXPECT_TRUE(report.passed()) << report.worst();
  EXPECT_GE(report.checked(), 200u);
  testing::set_fault(testing::Fault::kSigmoidDerivative);
  const GradSuiteReport faulty = run_op_suite(7);
  testing::set_fault(testing::Fault::kNone);
  EXPECT_FALSE(faulty.passed());
}

}  // namespace
}  // namespace cris
