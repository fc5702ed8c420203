#include "cris/synth_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cris/text_encoder.hpp"

namespace cris {

namespace fs = std::filesystem;

namespace {

// Geometry is tuned at 64 px and scales with the canvas.
constexpr double kRefSize = 64.0;
constexpr std::array<int, 4> kCountWeights{4, 4, 2, 1};  // for 2, 3, 4, 5 shapes
constexpr std::array<std::array<double, 2>, 4> kRadius{{{18, 23}, {16, 20}, {14, 17}, {12, 15}}};
constexpr double kInset = 0.5;  // centers stay this many radii from the border
constexpr double kGap = 2.0;
constexpr double kTwinProbability = 0.25;
constexpr double kRelationMargin = 4.0;
constexpr int kMaxAttempts = 100;
constexpr int kPlacementTries = 30;
constexpr std::array<std::uint8_t, 3> kBackground{28, 28, 28};

constexpr std::array<std::array<std::uint8_t, 3>, 4> kPalette{{
    {220, 40, 40},   // red
    {40, 190, 60},   // green
    {50, 90, 235},   // blue
    {235, 215, 40},  // yellow
}};

struct Pair {
  ShapeKind kind;
  Color color;
  bool operator==(const Pair&) const = default;
};

Pair pair_of(const ShapeSpec& s) { return {s.kind, s.color}; }

Pair random_pair(Rng& rng) {
  return {static_cast<ShapeKind>(rng.below(3)), static_cast<Color>(rng.below(4))};
}

bool holds(Relation r, const ShapeSpec& a, const ShapeSpec& b) {
  switch (r) {
    case Relation::kLeftOf: return a.cx < b.cx;
    case Relation::kRightOf: return a.cx > b.cx;
    case Relation::kAbove: return a.cy < b.cy;
    case Relation::kBelow: return a.cy > b.cy;
  }
  return false;
}

// Signed distance by which a satisfies r relative to b.
double margin(Relation r, const ShapeSpec& a, const ShapeSpec& b) {
  switch (r) {
    case Relation::kLeftOf: return b.cx - a.cx;
    case Relation::kRightOf: return a.cx - b.cx;
    case Relation::kAbove: return b.cy - a.cy;
    case Relation::kBelow: return a.cy - b.cy;
  }
  return 0;
}

std::string describe(const ShapeSpec& s) { return std::string(name(s.color)) + " " + std::string(name(s.kind)); }

// Composition: pairs only, referent first.
std::vector<Pair> compose(Rng& rng, bool& twin) {
  int pick = static_cast<int>(rng.below(11));
  int n = 2;
  for (std::size_t i = 0; i < kCountWeights.size(); ++i) {
    if (pick < kCountWeights[i]) {
      n = 2 + static_cast<int>(i);
      break;
    }
    pick -= kCountWeights[i];
  }
  const Pair ref = random_pair(rng);
  twin = n >= 3 && rng.uniform() < kTwinProbability;
  std::vector<Pair> pairs{ref};
  if (twin) {
    pairs.push_back(ref);
    Pair anchor;
    do anchor = random_pair(rng);
    while (anchor == ref);
    pairs.push_back(anchor);
  } else {
    Pair d = ref;
    if (rng.below(2) == 0) {
      do d.kind = static_cast<ShapeKind>(rng.below(3));
      while (d.kind == ref.kind);
    } else {
      do d.color = static_cast<Color>(rng.below(4));
      while (d.color == ref.color);
    }
    pairs.push_back(d);
  }
  while (static_cast<int>(pairs.size()) < n) {
    Pair p;
    do p = random_pair(rng);
    while (p == ref || (twin && p == pairs[2]));
    pairs.push_back(p);
  }
  return pairs;
}

std::optional<std::vector<ShapeSpec>> place(Rng& rng, const std::vector<Pair>& pairs, int size) {
  const double scale = size / kRefSize;
  const auto& rr = kRadius[pairs.size() - 2];
  std::vector<ShapeSpec> shapes;
  for (const Pair& p : pairs) {
    bool placed = false;
    for (int t = 0; t < kPlacementTries && !placed; ++t) {
      ShapeSpec s;
      s.kind = p.kind;
      s.color = p.color;
      s.radius = rng.uniform(rr[0], rr[1]) * scale;
      const double lo = kInset * s.radius, hi = size - kInset * s.radius;
      s.cx = rng.uniform(lo, hi);
      s.cy = rng.uniform(lo, hi);
      placed = true;
      for (const ShapeSpec& o : shapes) {
        if (std::hypot(s.cx - o.cx, s.cy - o.cy) <= s.radius + o.radius + kGap * scale) {
          placed = false;
          break;
        }
      }
      if (placed) shapes.push_back(s);
    }
    if (!placed) return std::nullopt;
  }
  return shapes;
}

// Picks a relation and anchor that single out shapes[0] against its twin.
std::optional<std::string> relational_expression(Rng& rng, const std::vector<ShapeSpec>& shapes, int size) {
  const double min_margin = kRelationMargin * size / kRefSize;
  std::vector<std::string> options;
  for (std::size_t a = 1; a < shapes.size(); ++a) {
    const Pair pa = pair_of(shapes[a]);
    int same = 0;
    for (const ShapeSpec& s : shapes) same += pair_of(s) == pa;
    if (same != 1) continue;
    for (int r = 0; r < 4; ++r) {
      const auto rel = static_cast<Relation>(r);
      if (margin(rel, shapes[0], shapes[a]) < min_margin) continue;
      bool excluded = true;
      for (std::size_t t = 1; t < shapes.size(); ++t) {
        if (pair_of(shapes[t]) == pair_of(shapes[0]) && margin(rel, shapes[t], shapes[a]) > -min_margin) excluded = false;
      }
      if (excluded) options.push_back(describe(shapes[0]) + " " + std::string(name(rel)) + " " + describe(shapes[a]));
    }
  }
  if (options.empty()) return std::nullopt;
  return options[rng.below(options.size())];
}

std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

}  // namespace

std::string_view name(ShapeKind kind) {
  static constexpr std::array<std::string_view, 3> names{"circle", "square", "triangle"};
  return names[static_cast<std::size_t>(kind)];
}

std::string_view name(Color color) {
  static constexpr std::array<std::string_view, 4> names{"red", "green", "blue", "yellow"};
  return names[static_cast<std::size_t>(color)];
}

std::string_view name(Relation relation) {
  static constexpr std::array<std::string_view, 4> names{"left of", "right of", "above", "below"};
  return names[static_cast<std::size_t>(relation)];
}

bool ShapeSpec::covers(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  switch (kind) {
    case ShapeKind::kCircle: return dx * dx + dy * dy <= radius * radius;
    case ShapeKind::kSquare: {
      const double h = radius / std::sqrt(2.0);
      return std::abs(dx) <= h && std::abs(dy) <= h;
    }
    case ShapeKind::kTriangle: {
      // Apex at (0, -r), base corners at (+-r*sqrt(3)/2, r/2).
      if (dy > radius / 2) return false;
      const double half_width = (dy + radius) / std::sqrt(3.0);
      return dy >= -radius && std::abs(dx) <= half_width;
    }
  }
  return false;
}

SceneSpec generate_scene(Rng& rng, int size) {
  if (size <= 0 || size % 32 != 0) throw ConfigError("scene size must be a positive multiple of 32");
  for (;;) {
    bool twin = false;
    const std::vector<Pair> pairs = compose(rng, twin);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      auto shapes = place(rng, pairs, size);
      if (!shapes) continue;
      SceneSpec scene;
      scene.size = size;
      scene.referent = 0;
      if (twin) {
        auto expr = relational_expression(rng, *shapes, size);
        if (!expr) continue;
        scene.expr = *expr;
      } else {
        scene.expr = describe((*shapes)[0]);
      }
      // Store shapes in random order so the referent index carries no signal.
      std::vector<ShapeSpec> shuffled = *shapes;
      std::vector<int> order(shuffled.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
      for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled[i] = (*shapes)[static_cast<std::size_t>(order[i])];
        if (order[i] == 0) scene.referent = static_cast<int>(i);
      }
      scene.shapes = std::move(shuffled);
      const auto hits = resolve_expression(scene.shapes, scene.expr);
      if (hits.size() != 1 || hits[0] != scene.referent) continue;
      return scene;
    }
  }
}

RgbImage render_scene(const SceneSpec& scene) {
  RgbImage img(scene.size, scene.size);
  for (int y = 0; y < scene.size; ++y)
    for (int x = 0; x < scene.size; ++x) {
      auto color = kBackground;
      for (const ShapeSpec& s : scene.shapes) {
        if (s.covers(x + 0.5, y + 0.5)) color = kPalette[static_cast<std::size_t>(s.color)];
      }
      std::copy(color.begin(), color.end(), img.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * scene.size + x) * 3);
    }
  return img;
}

BinaryMask render_mask(const SceneSpec& scene, int index) {
  const ShapeSpec& s = scene.shapes.at(static_cast<std::size_t>(index));
  BinaryMask m(scene.size, scene.size);
  for (int y = 0; y < scene.size; ++y)
    for (int x = 0; x < scene.size; ++x)
      m.pixels[static_cast<std::size_t>(y * scene.size + x)] = s.covers(x + 0.5, y + 0.5) ? 1 : 0;
  return m;
}

std::vector<int> resolve_expression(const std::vector<ShapeSpec>& shapes, std::string_view expr) {
  const std::vector<std::string> words = split_words(expr);
  auto parse_pair = [&](std::size_t at) -> std::optional<Pair> {
    if (at + 1 >= words.size()) return std::nullopt;
    std::optional<Pair> p;
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < 3; ++k)
        if (words[at] == name(static_cast<Color>(c)) && words[at + 1] == name(static_cast<ShapeKind>(k)))
          p = Pair{static_cast<ShapeKind>(k), static_cast<Color>(c)};
    return p;
  };
  const auto target = parse_pair(0);
  if (!target) return {};
  std::optional<Relation> rel;
  std::optional<Pair> anchor;
  if (words.size() > 2) {
    std::size_t next = 0;
    if (words.size() == 6 && words[3] == "of" && (words[2] == "left" || words[2] == "right")) {
      rel = words[2] == "left" ? Relation::kLeftOf : Relation::kRightOf;
      next = 4;
    } else if (words.size() == 5 && (words[2] == "above" || words[2] == "below")) {
      rel = words[2] == "above" ? Relation::kAbove : Relation::kBelow;
      next = 3;
    } else {
      return {};
    }
    anchor = parse_pair(next);
    if (!anchor) return {};
  }
  std::vector<int> hits;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (!(pair_of(shapes[i]) == *target)) continue;
    bool ok = !rel;
    for (std::size_t j = 0; j < shapes.size() && !ok; ++j) {
      ok = j != i && pair_of(shapes[j]) == *anchor && holds(*rel, shapes[i], shapes[j]);
    }
    if (ok) hits.push_back(static_cast<int>(i));
  }
  return hits;
}

std::vector<SampleRecord> generate_dataset(int count, int size, std::uint64_t seed, const fs::path& out_dir) {
  if (count < 1) throw ConfigError("count must be at least 1");
  if (size <= 0 || size % 32 != 0) throw ConfigError("size must be a positive multiple of 32");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  Rng rng(seed);
  std::vector<SampleRecord> records;
  std::string manifest;
  for (int i = 0; i < count; ++i) {
    const SceneSpec scene = generate_scene(rng, size);
    SampleRecord r{sample_id(i), "images/" + sample_id(i) + ".ppm", "masks/" + sample_id(i) + ".pgm", scene.expr};
    write_file(out_dir / r.image, encode_ppm(render_scene(scene)));
    write_file(out_dir / r.mask, encode_mask(render_mask(scene, scene.referent)));
    manifest += nlohmann::json{{"id", r.id}, {"image", r.image}, {"mask", r.mask}, {"expr", r.expr}}.dump() + "\n";
    records.push_back(std::move(r));
  }
  write_file(out_dir / "manifest.jsonl", std::vector<std::uint8_t>(manifest.begin(), manifest.end()));
  return records;
}

namespace {

std::vector<SampleRecord> parse_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<SampleRecord> records;
  std::set<std::string> ids;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& what) {
      return DataError(path.string() + " line " + std::to_string(lineno) + ": " + what);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw fail("malformed JSON");
    }
    SampleRecord r;
    for (auto [key, field] : {std::pair{"id", &r.id}, {"image", &r.image}, {"mask", &r.mask}, {"expr", &r.expr}}) {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string()) throw fail(std::string("missing string field \"") + key + "\"");
      *field = j[key].get<std::string>();
    }
    if (!ids.insert(r.id).second) throw fail("duplicate id " + r.id);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw DataError(path.string() + ": manifest has no records");
  return records;
}

Sample load_sample(const fs::path& dir, const SampleRecord& r) {
  try {
    Sample s{r.id, decode_ppm(read_file(dir / r.image)), decode_mask(read_file(dir / r.mask)), r.expr};
    if (s.mask.height != s.image.height || s.mask.width != s.image.width) throw DataError("mask and image sizes differ");
    return s;
  } catch (const DataError& e) {
    throw DataError("sample " + r.id + ": " + e.what());
  }
}

}  // namespace

std::vector<SampleRecord> load_manifest(const fs::path& dir) {
  std::vector<SampleRecord> records = parse_manifest(dir);
  for (const SampleRecord& r : records) load_sample(dir, r);
  return records;
}

std::vector<Sample> load_dataset(const fs::path& dir) {
  std::vector<Sample> samples;
  for (const SampleRecord& r : parse_manifest(dir)) samples.push_back(load_sample(dir, r));
  return samples;
}

static std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

Sample mirror_sample(const Sample& sample) {
  Sample out = sample;
  const int h = sample.image.height, w = sample.image.width;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t src = static_cast<std::size_t>(y * w + (w - 1 - x)), dst = static_cast<std::size_t>(y * w + x);
      for (std::size_t c = 0; c < 3; ++c) out.image.rgb[dst * 3 + c] = sample.image.rgb[src * 3 + c];
    }
  for (int y = 0; y < sample.mask.height; ++y)
    for (int x = 0; x < sample.mask.width; ++x) {
      out.mask.pixels[static_cast<std::size_t>(y * sample.mask.width + x)] = sample.mask.at(y, sample.mask.width - 1 - x);
    }
  std::vector<std::string> words;
  std::istringstream is(sample.expr);
  for (std::string word; is >> word;) words.push_back(word == "left" ? "right" : word == "right" ? "left" : word);
  out.expr = join(words);
  return out;
}

Sample recolor_sample(const Sample& sample, const std::array<int, 4>& perm) {
  Sample out = sample;
  for (std::size_t i = 0; i + 2 < out.image.rgb.size(); i += 3) {
    for (std::size_t k = 0; k < kPalette.size(); ++k) {
      if (std::equal(kPalette[k].begin(), kPalette[k].end(), sample.image.rgb.begin() + static_cast<std::ptrdiff_t>(i))) {
        const auto& to = kPalette[static_cast<std::size_t>(perm[k])];
        std::copy(to.begin(), to.end(), out.image.rgb.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
  }
  std::vector<std::string> words;
  std::istringstream is(sample.expr);
  for (std::string word; is >> word;) {
    for (std::size_t k = 0; k < kPalette.size(); ++k) {
      if (word == name(static_cast<Color>(k))) {
        word = name(static_cast<Color>(perm[k]));
        break;
      }
    }
    words.push_back(word);
  }
  out.expr = join(words);
  return out;
}

}  // namespace cris
