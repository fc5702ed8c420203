#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace cris {

struct DecoderConfig {
  int n_layers = 2;
  int n_heads = 4;
  int d_ffn = 128;
};

struct OptimizerConfig {
  double lr = 1e-3;
  double decay_factor = 0.1;
  int decay_epoch = 30;  // 1-based; epochs >= decay_epoch run at lr * decay_factor
  int epochs = 40;
  int batch_size = 16;
};

// Switches for the two contributions: the text-to-pixel contrastive head and
// the vision-language decoder.
struct AblationConfig {
  bool con = true;
  bool dec = true;
};

/// Everything needed to rebuild a model and rerun its training.
struct RunConfig {
  std::string profile = "desk";
  int image_size = 64;
  int max_len = 8;
  int width = 64;        // C: neck/decoder/text token width
  int text_width = 64;   // C': pooled sentence feature
  int joint_width = 64;  // D: projector output
  std::array<int, 2> stem{8, 16};
  std::array<int, 3> backbone{16, 32, 64};  // stride 8/16/32 stage widths
  int text_layers = 2;
  int text_heads = 4;
  int text_ffn = 128;
  DecoderConfig decoder;
  OptimizerConfig optimizer;
  AblationConfig ablation;
  std::uint64_t seed = 7;
  int val_count = 0;  // 0 selects the last 10% of the manifest
  std::string init = "fan_in_uniform";
  // Per-epoch random mirroring and palette permutation of synthetic training samples.
  bool augment = true;

  static RunConfig desk();
  static RunConfig paper();
  static RunConfig for_profile(const std::string& profile);

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys fall back to the defaults of the document's "profile".
RunConfig config_from_json(const nlohmann::json& doc);

}  // namespace cris
