#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cris/config.hpp"
#include "cris/layers.hpp"
#include "cris/parameters.hpp"

namespace cris {

inline constexpr int kPadId = 0;
inline constexpr int kSosId = 1;
inline constexpr int kEosId = 2;

/// Closed word-level vocabulary. Reserved ids come first, then words in sorted order.
class Vocab {
 public:
  static Vocab build(std::span<const std::string> corpus);
  static Vocab from_json(const nlohmann::json& doc);

  /// Sorted token -> id object.
  nlohmann::json to_json() const;
  int size() const { return static_cast<int>(ids_.size()); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  int id(const std::string& token) const;
  const std::map<std::string, int>& tokens() const { return ids_; }

  bool operator==(const Vocab& other) const { return ids_ == other.ids_; }

 private:
  std::map<std::string, int> ids_;
};

/// Lower-cased whitespace split.
std::vector<std::string> split_words(std::string_view expr);

struct TokenSeq {
  std::vector<int> ids;  // [SOS, words..., EOS, PAD...], length max_len
  int eos_pos = 0;

  /// 1 at padding positions (after EOS).
  std::vector<std::uint8_t> pad_mask() const;
};

/// Throws DataError on an out-of-vocabulary word or an expression longer than max_len - 2.
TokenSeq tokenize(std::string_view expr, const Vocab& vocab, int max_len);

struct TextFeatures {
  Tensor tokens;  // F_t [max_len, C], final layer after layer norm
  Tensor global;  // F_s [C'], linear map of the EOS activation
  std::vector<std::uint8_t> pad_mask;
};

/// Token + learned position embeddings, causal pre-norm transformer layers,
/// final layer norm, EOS pooling.
class TextEncoder {
 public:
  TextEncoder(ParameterStore& store, const RunConfig& config, int vocab_size, Rng& rng);

  TextFeatures encode(const TokenSeq& seq) const;

 private:
  struct Layer {
    LayerNormParams ln1;
    AttentionParams attn;
    LayerNormParams ln2;
    MlpParams mlp;
  };
  int max_len_;
  int heads_;
  Tensor token_embedding_;
  Tensor position_embedding_;
  std::vector<Layer> layers_;
  LayerNormParams final_ln_;
  Tensor pool_w_, pool_b_;
};

}  // namespace cris
