#include "cris/grad_suite.hpp"

#include <algorithm>
#include <functional>

#include "cris/image_io.hpp"
#include "cris/model.hpp"
#include "cris/ops.hpp"
#include "cris/synth_data.hpp"

namespace cris {

double GradSuiteReport::worst() const {
  const GradSuiteEntry* e = worst_entry();
  return e ? e->result.max_rel_error : 0.0;
}

const GradSuiteEntry* GradSuiteReport::worst_entry() const {
  const GradSuiteEntry* best = nullptr;
  for (const auto& e : entries)
    if (!best || e.result.max_rel_error > best->result.max_rel_error) best = &e;
  return best;
}

std::size_t GradSuiteReport::checked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.result.checked;
  return n;
}

std::size_t GradSuiteReport::skipped() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.result.skipped_kinks;
  return n;
}

void GradSuiteReport::append(const GradSuiteReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(shape, std::move(v));
}

// Weighted sum with fixed random weights turns any op into a scalar probe.
Tensor probe(const Tensor& y) {
  Rng rng(99);
  return sum(mul(y, random_tensor(rng, y.shape())));
}

using Fn = std::function<Tensor(const Tensor&)>;

}  // namespace

GradSuiteReport run_op_suite(std::uint64_t seed) {
  Rng rng(seed);
  GradSuiteReport report;
  auto check = [&](const std::string& name, const Fn& f, const Tensor& x) {
    report.entries.push_back({name, finite_diff_check(f, x)});
  };
  for (int trial = 0; trial < 3; ++trial) {
    const int a = rng.range(1, 5), b = rng.range(2, 5), c = rng.range(1, 5);
    auto other = random_tensor(rng, {b, c});
    auto same = random_tensor(rng, {a, b});
    auto vec = random_tensor(rng, {b});
    auto kernel3 = random_tensor(rng, {2, a, 3, 3});
    auto kbias = random_tensor(rng, {2});
    std::vector<std::uint8_t> key_mask(static_cast<std::size_t>(b), 0);
    key_mask.back() = 1;
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(a * b));
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
    std::vector<int> rows{0, a - 1, 0};

    const std::vector<std::pair<const char*, Fn>> rank2 = {
        {"matmul", [&](const Tensor& x) { return probe(matmul(x, other)); }},
        {"linear", [&](const Tensor& x) { return probe(linear(x, other, Tensor())); }},
        {"transpose", [&](const Tensor& x) { return probe(transpose(x)); }},
        {"reshape", [&](const Tensor& x) { return probe(reshape(x, Shape{b, a})); }},
        {"relu", [&](const Tensor& x) { return probe(relu(x)); }},
        {"sigmoid", [&](const Tensor& x) { return probe(sigmoid(x)); }},
        {"add", [&](const Tensor& x) { return probe(add(x, same)); }},
        {"mul", [&](const Tensor& x) { return probe(mul(x, x)); }},
        {"scale", [&](const Tensor& x) { return probe(scale(x, -2.5)); }},
        {"concat", [&](const Tensor& x) { return probe(concat({x, same, x}, 1)); }},
        {"softmax", [&](const Tensor& x) { return probe(softmax(x, 1)); }},
        {"masked_softmax", [&](const Tensor& x) { return probe(masked_softmax(x, key_mask, false)); }},
        {"causal_softmax", [&](const Tensor& x) { return probe(masked_softmax(x, {}, true)); }},
        {"layer_norm", [&](const Tensor& x) { return probe(layer_norm(x, vec, vec)); }},
        {"slice_cols", [&](const Tensor& x) { return probe(slice_cols(x, 0, 1)); }},
        {"select_row", [&](const Tensor& x) { return probe(select_row(x, a - 1)); }},
        {"gather_rows", [&](const Tensor& x) { return probe(gather_rows(x, rows)); }},
        {"logistic_loss", [&](const Tensor& x) { return logistic_loss(x, labels); }},
        {"sum", [&](const Tensor& x) { return sum(mul(x, same)); }},
        {"mean", [&](const Tensor& x) { return mean(mul(x, x)); }},
    };
    for (const auto& [name, f] : rank2) check(name, f, random_tensor(rng, {a, b}));
    auto x = random_tensor(rng, {a, b});
    check("matmul_rhs", [&](const Tensor& rhs) { return probe(matmul(x, rhs)); }, other);
    check("layer_norm_gain", [&](const Tensor& g) { return probe(layer_norm(x, g, vec)); }, vec);
    check("layer_norm_bias", [&](const Tensor& bias) { return probe(layer_norm(x, vec, bias)); }, vec);
    check("linear_weight", [&](const Tensor& w) { return probe(linear(x, w, Tensor())); }, other);
    check("linear_bias", [&](const Tensor& bias) { return probe(linear(x, other, bias)); }, random_tensor(rng, {c}));

    const int h = 2 * rng.range(1, 2), w = 2 * rng.range(1, 2);
    auto chan = random_tensor(rng, {a});
    auto kernel1 = random_tensor(rng, {2, a, 1, 1});
    const std::vector<std::pair<const char*, Fn>> maps = {
        {"conv3x3", [&](const Tensor& m) { return probe(conv2d(m, kernel3, kbias, 1, 1)); }},
        {"conv3x3_stride2", [&](const Tensor& m) { return probe(conv2d(m, kernel3, kbias, 2, 1)); }},
        {"conv1x1", [&](const Tensor& m) { return probe(conv2d(m, kernel1, kbias, 1, 0)); }},
        {"avgpool2", [&](const Tensor& m) { return probe(avgpool2(m)); }},
        {"upsample2", [&](const Tensor& m) { return probe(upsample(m, 2)); }},
        {"upsample4", [&](const Tensor& m) { return probe(resample(m, Resample::kUp4)); }},
        {"upsample_to", [&](const Tensor& m) { return probe(upsample_to(m, 5, 3)); }},
        {"mul_channels", [&](const Tensor& m) { return probe(mul_channels(m, chan)); }},
        {"flatten_map", [&](const Tensor& m) { return probe(flatten_map(m)); }},
        {"unflatten_map", [&](const Tensor& m) { return probe(unflatten_map(flatten_map(m), h, w)); }},
    };
    for (const auto& [name, f] : maps) check(name, f, random_tensor(rng, {a, h, w}));
    auto m = random_tensor(rng, {a, h, w});
    check("conv_kernel", [&](const Tensor& k) { return probe(conv2d(m, k, kbias, 1, 1)); }, kernel3);
    check("conv_bias", [&](const Tensor& bias) { return probe(conv2d(m, kernel3, bias, 2, 1)); }, kbias);
    check("mul_channels_scale", [&](const Tensor& v) { return probe(mul_channels(m, v)); }, random_tensor(rng, {a}));
  }
  return report;
}

GradSuiteReport run_model_suite(std::uint64_t seed, std::size_t min_coordinates) {
  RunConfig config = RunConfig::desk();
  config.seed = seed;
  Rng rng(seed);
  const SceneSpec scene = generate_scene(rng, config.image_size);
  const std::vector<std::string> corpus{scene.expr, "red green blue yellow circle square triangle left right of above below"};
  CrisModel model(config, Vocab::build(corpus));

  const Tensor image = image_tensor(render_scene(scene));
  const TokenSeq tokens = model.tokenize(scene.expr);
  const int grid = config.image_size / 4;
  const GroundTruthMask gt = GroundTruthMask::from_full(render_mask(scene, scene.referent), grid, grid);

  // A few coordinates from every tensor, topped up round-robin until the minimum is met.
  auto& params = model.parameters().all();
  std::vector<std::vector<Coordinate>> per_tensor(params.size());
  std::size_t total = 0;
  for (std::size_t round = 0; total < min_coordinates || round < 2; ++round) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      const Tensor& t = params[p].tensor;
      if (per_tensor[p].size() >= t.size()) continue;
      per_tensor[p].push_back({t, static_cast<std::size_t>(rng.below(t.size()))});
      ++total;
    }
  }
  GradSuiteReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const GradCheckResult r = check_gradients([&] { return model.loss(image, tokens, gt); }, per_tensor[p]);
    report.entries.push_back({params[p].name, r});
  }
  return report;
}

GradSuiteReport run_grad_suite(std::uint64_t seed) {
  GradSuiteReport report = run_op_suite(seed);
  report.append(run_model_suite(seed));
  return report;
}

}  // namespace cris
