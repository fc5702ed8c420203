#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>

#include <unistd.h>

#include "cris/image_io.hpp"
#include "cris/synth_data.hpp"
#include "cris/text_encoder.hpp"

namespace cris {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cris_synth_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

// Second resolver, written against the grammar text rather than the generator's parser.
std::vector<int> reference_resolve(const SceneSpec& scene) {
  static const std::regex simple("^(\\w+) (\\w+)$");
  static const std::regex relational("^(\\w+) (\\w+) (left of|right of|above|below) (\\w+) (\\w+)$");
  std::smatch m;
  auto is = [](const ShapeSpec& s, const std::string& color, const std::string& kind) {
    return name(s.color) == color && name(s.kind) == kind;
  };
  std::vector<int> out;
  if (std::regex_match(scene.expr, m, simple)) {
    for (std::size_t i = 0; i < scene.shapes.size(); ++i)
      if (is(scene.shapes[i], m[1], m[2])) out.push_back(static_cast<int>(i));
    return out;
  }
  if (!std::regex_match(scene.expr, m, relational)) return {};
  const std::string rel = m[3];
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    if (!is(scene.shapes[i], m[1], m[2])) continue;
    for (std::size_t j = 0; j < scene.shapes.size(); ++j) {
      if (j == i || !is(scene.shapes[j], m[4], m[5])) continue;
      const ShapeSpec &a = scene.shapes[i], &b = scene.shapes[j];
      const bool ok = (rel == "left of" && a.cx < b.cx) || (rel == "right of" && a.cx > b.cx) ||
                      (rel == "above" && a.cy < b.cy) || (rel == "below" && a.cy > b.cy);
      if (ok) {
        out.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

TEST(Scene, InvariantsHoldOnManyScenes) {
  Rng rng(91);
  int relational = 0;
  for (int t = 0; t < 2000; ++t) {
    const SceneSpec s = generate_scene(rng, 64);
    ASSERT_GE(s.shapes.size(), 2u);
    ASSERT_LE(s.shapes.size(), 5u);
    for (std::size_t i = 0; i < s.shapes.size(); ++i)
      for (std::size_t j = i + 1; j < s.shapes.size(); ++j) {
        const ShapeSpec &a = s.shapes[i], &b = s.shapes[j];
        ASSERT_GT(std::hypot(a.cx - b.cx, a.cy - b.cy), a.radius + b.radius + 2.0);
      }
    const ShapeSpec& ref = s.shapes[static_cast<std::size_t>(s.referent)];
    bool distractor = false;
    for (std::size_t i = 0; i < s.shapes.size(); ++i) {
      if (static_cast<int>(i) != s.referent) distractor |= s.shapes[i].color == ref.color || s.shapes[i].kind == ref.kind;
    }
    ASSERT_TRUE(distractor) << s.expr;
    const auto hits = reference_resolve(s);
    ASSERT_EQ(hits.size(), 1u) << s.expr;
    ASSERT_EQ(hits[0], s.referent) << s.expr;
    ASSERT_EQ(resolve_expression(s.shapes, s.expr), hits);
    ASSERT_GT(render_mask(s, s.referent).count(), 0u);
    relational += s.expr.find(' ', s.expr.find(' ') + 1) != std::string::npos;
  }
  EXPECT_GT(relational, 100);
}

TEST(Scene, RejectsIndivisibleSize) {
  Rng rng(92);
  EXPECT_THROW(generate_scene(rng, 48), ConfigError);
}

TEST(Scene, MaskEqualsRenderedReferentCoverage) {
  Rng rng(93);
  for (int t = 0; t < 50; ++t) {
    const SceneSpec s = generate_scene(rng, 64);
    const RgbImage img = render_scene(s);
    const BinaryMask m = render_mask(s, s.referent);
    const ShapeSpec& ref = s.shapes[static_cast<std::size_t>(s.referent)];
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        ASSERT_EQ(m.at(y, x), ref.covers(x + 0.5, y + 0.5) ? 1 : 0);
        // Foreground pixels carry the referent's color; shapes never overlap.
        if (m.at(y, x)) {
          int owners = 0;
          for (const ShapeSpec& o : s.shapes) owners += o.covers(x + 0.5, y + 0.5);
          ASSERT_EQ(owners, 1);
        }
      }
    (void)img;
  }
}

TEST(Shapes, CoverageByHand) {
  const ShapeSpec circle{ShapeKind::kCircle, Color::kRed, 10, 10, 5};
  EXPECT_TRUE(circle.covers(10, 15));
  EXPECT_FALSE(circle.covers(10, 15.01));
  const ShapeSpec square{ShapeKind::kSquare, Color::kRed, 0, 0, std::sqrt(2.0) * 3};
  EXPECT_TRUE(square.covers(2.99, -2.99));
  EXPECT_FALSE(square.covers(3.01, 0));
  const ShapeSpec tri{ShapeKind::kTriangle, Color::kRed, 0, 0, 2};
  EXPECT_TRUE(tri.covers(0, -1.99));
  EXPECT_TRUE(tri.covers(1.7, 0.99));
  EXPECT_FALSE(tri.covers(0, 1.01));
  EXPECT_FALSE(tri.covers(1.0, -1.0));
}

Sample to_sample(const SceneSpec& scene) {
  return {"x", render_scene(scene), render_mask(scene, scene.referent), scene.expr};
}

TEST(Augment, MirrorMatchesMirroredScene) {
  Rng rng(95);
  for (int t = 0; t < 200; ++t) {
    SceneSpec s = generate_scene(rng, 64);
    const Sample mirrored = mirror_sample(to_sample(s));
    for (ShapeSpec& shape : s.shapes) shape.cx = 64 - shape.cx;
    s.expr = mirrored.expr;
    ASSERT_EQ(mirrored.image, render_scene(s)) << t;
    ASSERT_EQ(mirrored.mask, render_mask(s, s.referent));
    ASSERT_EQ(reference_resolve(s), std::vector<int>{s.referent}) << s.expr;
  }
  EXPECT_EQ(mirror_sample({"x", RgbImage(1, 1), BinaryMask(1, 1), "red circle left of blue square"}).expr,
            "red circle right of blue square");
}

TEST(Augment, RecolorMatchesRecoloredScene) {
  Rng rng(96);
  const std::array<int, 4> perm{2, 0, 3, 1};
  for (int t = 0; t < 200; ++t) {
    SceneSpec s = generate_scene(rng, 64);
    const Sample recolored = recolor_sample(to_sample(s), perm);
    for (ShapeSpec& shape : s.shapes) shape.color = static_cast<Color>(perm[static_cast<std::size_t>(shape.color)]);
    s.expr = recolored.expr;
    ASSERT_EQ(recolored.image, render_scene(s)) << t;
    ASSERT_EQ(recolored.mask, render_mask(s, s.referent));
    ASSERT_EQ(reference_resolve(s), std::vector<int>{s.referent}) << s.expr;
  }
  EXPECT_EQ(recolor_sample({"x", RgbImage(1, 1), BinaryMask(1, 1), "red circle above yellow square"}, perm).expr,
            "blue circle above green square");
}

TEST(Dataset, DeterministicBytes) {
  const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  generate_dataset(25, 64, 7, a);
  generate_dataset(25, 64, 7, b);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  EXPECT_EQ(files.size(), 51u);
  for (const fs::path& f : files) EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  const fs::path c = temp_dir("det_c");
  generate_dataset(25, 64, 8, c);
  EXPECT_NE(read_file(a / "manifest.jsonl"), read_file(c / "manifest.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(Dataset, ClosedGrammarHasNoOov) {
  const fs::path dir = temp_dir("oov");
  const auto records = generate_dataset(300, 64, 11, dir);
  const std::vector<std::string> grammar{"red green blue yellow circle square triangle left right of above below"};
  const Vocab vocab = Vocab::build(grammar);
  for (const SampleRecord& r : records) EXPECT_NO_THROW(tokenize(r.expr, vocab, 8)) << r.expr;
  fs::remove_all(dir);
}

TEST(Dataset, RoundTripThroughManifest) {
  const fs::path dir = temp_dir("round");
  const auto written = generate_dataset(12, 64, 3, dir);
  EXPECT_EQ(load_manifest(dir), written);
  const auto samples = load_dataset(dir);
  ASSERT_EQ(samples.size(), 12u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(samples[i].id, written[i].id);
    EXPECT_EQ(samples[i].image.height, 64);
    EXPECT_GT(samples[i].mask.count(), 0u);
  }
  fs::remove_all(dir);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

TEST(Dataset, TruncatedLineNamesLineNumber) {
  const fs::path dir = temp_dir("trunc");
  generate_dataset(3, 64, 4, dir);
  const auto raw = read_file(dir / "manifest.jsonl");
  std::string text(raw.begin(), raw.end());
  const auto second = text.find('\n') + 1;
  const auto third = text.find('\n', second);
  text = text.substr(0, second) + text.substr(second, (third - second) / 2) + text.substr(third);
  write_text(dir / "manifest.jsonl", text);
  try {
    load_manifest(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, GrayMaskRejected) {
  const fs::path dir = temp_dir("gray");
  const auto records = generate_dataset(2, 64, 5, dir);
  auto bytes = read_file(dir / records[1].mask);
  bytes.back() = 128;
  write_file(dir / records[1].mask, bytes);
  try {
    load_manifest(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mask not binary"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find(records[1].id), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, MissingFileRejected) {
  const fs::path dir = temp_dir("missing");
  const auto records = generate_dataset(2, 64, 6, dir);
  fs::remove(dir / records[0].image);
  EXPECT_THROW(load_manifest(dir), DataError);
  EXPECT_THROW(load_manifest(dir / "nope"), DataError);
  fs::remove_all(dir);
}

TEST(Codec, PpmRoundTrip) {
  Rng rng(94);
  RgbImage img(7, 5);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng.below(256));
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
}

TEST(Codec, TwoByTwoForegroundPgmPayload) {
  const auto bytes = encode_mask(BinaryMask(2, 2, 1));
  const std::string header = "P5\n2 2\n255\n";
  std::vector<std::uint8_t> expected(header.begin(), header.end());
  expected.insert(expected.end(), 4, 0xFF);
  EXPECT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(bytes, expected);
  EXPECT_EQ(decode_mask(bytes), BinaryMask(2, 2, 1));
}

TEST(Codec, AsciiVariantsRejected) {
  const std::string p3 = "P3\n1 1\n255\n0 0 0\n", p2 = "P2\n1 1\n255\n0\n";
  EXPECT_THROW(decode_ppm({p3.begin(), p3.end()}), DataError);
  EXPECT_THROW(decode_pgm({p2.begin(), p2.end()}), DataError);
  const std::string short_raster = "P5\n2 2\n255\n\xff";
  EXPECT_THROW(decode_pgm({short_raster.begin(), short_raster.end()}), DataError);
}

}  // namespace
}  // namespace cris
