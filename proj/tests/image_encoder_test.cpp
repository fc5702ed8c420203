#include <gtest/gtest.h>

#include "cris/grad_check.hpp"
#include "cris/image_encoder.hpp"
#include "cris/ops.hpp"
#include "test_util.hpp"

namespace cris {
namespace {

using test::random_tensor;

TEST(ImageEncoder, DeskPyramidExtents) {
  const RunConfig config = RunConfig::desk();
  ParameterStore store;
  Rng rng(1);
  ImageEncoder enc(store, config, rng);
  const FeaturePyramid p = enc.encode(random_tensor(rng, {3, 64, 64}, false, 0.0, 1.0));
  EXPECT_EQ(p.v2.shape(), (Shape{16, 8, 8}));
  EXPECT_EQ(p.v3.shape(), (Shape{32, 4, 4}));
  EXPECT_EQ(p.v4.shape(), (Shape{64, 2, 2}));
}

TEST(ImageEncoder, PaperSizeExtents) {
  RunConfig config = RunConfig::desk();
  config.image_size = 416;
  ParameterStore store;
  Rng rng(2);
  ImageEncoder enc(store, config, rng);
  const FeaturePyramid p = enc.encode(random_tensor(rng, {3, 416, 416}, false, 0.0, 1.0));
  EXPECT_EQ(p.v2.shape(), (Shape{16, 52, 52}));
  EXPECT_EQ(p.v3.shape(), (Shape{32, 26, 26}));
  EXPECT_EQ(p.v4.shape(), (Shape{64, 13, 13}));
}

TEST(ImageEncoder, RejectsIndivisibleInput) {
  const RunConfig config = RunConfig::desk();
  ParameterStore store;
  Rng rng(3);
  ImageEncoder enc(store, config, rng);
  EXPECT_THROW(enc.encode(Tensor::zeros({3, 48, 64})), ShapeError);
  EXPECT_THROW(enc.encode(Tensor::zeros({1, 64, 64})), ShapeError);
}

// Content far from every border, shifted by one stage-4 cell.
TEST(ImageEncoder, TranslationBy32PixelsShiftsStage4ByOneCell) {
  const RunConfig config = RunConfig::desk();
  ParameterStore store;
  Rng rng(4);
  ImageEncoder enc(store, config, rng);
  const int size = 320, shift = 32;
  Array a(Shape{3, size, size}), b(Shape{3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 128; y < 192; ++y)
      for (int x = 128; x < 160; ++x) {
        const double v = rng.uniform();
        a[static_cast<std::size_t>((c * size + y) * size + x)] = v;
        b[static_cast<std::size_t>((c * size + y) * size + x + shift)] = v;
      }
  const Tensor fa = enc.encode(Tensor(a)).v4, fb = enc.encode(Tensor(b)).v4;
  const int ch = fa.shape()[0], g = fa.shape()[1];
  double worst = 0, energy = 0;
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < g; ++y)
      for (int x = 0; x + 1 < g; ++x) {
        const double va = fa.at(static_cast<std::size_t>((c * g + y) * g + x));
        const double vb = fb.at(static_cast<std::size_t>((c * g + y) * g + x + 1));
        worst = std::max(worst, std::abs(va - vb));
        energy += std::abs(va);
      }
  EXPECT_GT(energy, 0.0);
  EXPECT_LT(worst, 1e-12);
}

TEST(ImageEncoder, GradientsThroughAllStages) {
  RunConfig config = RunConfig::desk();
  config.stem = {3, 4};
  config.backbone = {4, 4, 4};
  ParameterStore store;
  Rng rng(5);
  ImageEncoder enc(store, config, rng);
  const Tensor img = random_tensor(rng, {3, 32, 32}, true, 0.0, 1.0);
  const Tensor w2 = random_tensor(rng, {4, 4, 4}), w3 = random_tensor(rng, {4, 2, 2}), w4 = random_tensor(rng, {4, 1, 1});
  auto loss = [&] {
    const FeaturePyramid p = enc.encode(img);
    return add(add(sum(mul(p.v2, w2)), sum(mul(p.v3, w3))), sum(mul(p.v4, w4)));
  };
  std::vector<Coordinate> coords;
  for (const Parameter& p : store.all())
    for (int k = 0; k < 4; ++k) coords.push_back({p.tensor, static_cast<std::size_t>(rng.below(p.tensor.size()))});
  for (int k = 0; k < 16; ++k) coords.push_back({img, static_cast<std::size_t>(rng.below(img.size()))});
  const GradCheckResult r = check_gradients(loss, coords);
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_GT(r.checked, coords.size() / 2);
}

}  // namespace
}  // namespace cris
