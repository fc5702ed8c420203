#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cris/image_io.hpp"
#include "cris/mask.hpp"
#include "cris/random.hpp"

namespace cris {

enum class ShapeKind { kCircle, kSquare, kTriangle };
enum class Color { kRed, kGreen, kBlue, kYellow };
enum class Relation { kLeftOf, kRightOf, kAbove, kBelow };

std::string_view name(ShapeKind kind);
std::string_view name(Color color);
std::string_view name(Relation relation);  // "left of", "right of", "above", "below"

/// A shape lies inside the circle of the given radius around its center.
/// Squares are axis aligned with half side r/sqrt(2); triangles are
/// equilateral, apex up.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kCircle;
  Color color = Color::kRed;
  double cx = 0, cy = 0, radius = 0;

  /// True when the point lies inside the shape (boundary included).
  bool covers(double x, double y) const;
};

struct SceneSpec {
  int size = 0;
  std::vector<ShapeSpec> shapes;
  int referent = 0;
  std::string expr;
};

/// One valid scene: 2-5 non-overlapping shapes, at least one distractor
/// sharing the referent's color or kind, and an expression only the referent satisfies.
SceneSpec generate_scene(Rng& rng, int size);

/// A pixel is foreground when its center lies inside the shape.
RgbImage render_scene(const SceneSpec& scene);
BinaryMask render_mask(const SceneSpec& scene, int index);

/// Indices of shapes satisfying the expression under the generator's grammar.
std::vector<int> resolve_expression(const std::vector<ShapeSpec>& shapes, std::string_view expr);

struct SampleRecord {
  std::string id;
  std::string image;  // relative to the dataset directory
  std::string mask;
  std::string expr;
  bool operator==(const SampleRecord&) const = default;
};

/// Writes out_dir/{manifest.jsonl, images/*.ppm, masks/*.pgm}. Bytes depend only on (count, size, seed).
std::vector<SampleRecord> generate_dataset(int count, int size, std::uint64_t seed, const std::filesystem::path& out_dir);

/// Parses and validates the manifest: referenced files exist and masks are binary.
/// Malformed lines raise DataError naming the line number.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& dir);

struct Sample {
  std::string id;
  RgbImage image;
  BinaryMask mask;
  std::string expr;
};

/// Loads every record; errors name the sample id.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

/// Mirror image and mask left to right; "left" and "right" swap in the expression.
Sample mirror_sample(const Sample& sample);

/// Repaint palette color i as palette color perm[i], in pixels and in the
/// expression. Pixels and words outside the palette are left alone.
Sample recolor_sample(const Sample& sample, const std::array<int, 4>& perm);

}  // namespace cris
