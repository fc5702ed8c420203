#include "cris/text_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "cris/ops.hpp"

namespace cris {

std::vector<std::string> split_words(std::string_view expr) {
  std::string lowered(expr);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream is(lowered);
  std::vector<std::string> words;
  for (std::string w; is >> w;) words.push_back(std::move(w));
  return words;
}

Vocab Vocab::build(std::span<const std::string> corpus) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  std::set<std::string> words;
  for (const auto& expr : corpus)
    for (auto& w : split_words(expr)) words.insert(std::move(w));
  Vocab v;
  v.ids_ = {{"<pad>", kPadId}, {"<sos>", kSosId}, {"<eos>", kEosId}};
  int next = 3;
  for (const auto& w : words) {
    if (!v.ids_.count(w)) v.ids_.emplace(w, next++);
  }
  return v;
}

Vocab Vocab::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw DataError("vocab must be a JSON object");
  Vocab v;
  std::vector<bool> seen(doc.size(), false);
  for (const auto& [token, id] : doc.items()) {
    if (!id.is_number_integer()) throw DataError("vocab id for '" + token + "' is not an integer");
    const int i = id.get<int>();
    if (i < 0 || i >= static_cast<int>(doc.size()) || seen[static_cast<std::size_t>(i)]) {
      throw DataError("vocab ids must be dense and unique");
    }
    seen[static_cast<std::size_t>(i)] = true;
    v.ids_.emplace(token, i);
  }
  if (v.id("<pad>") != kPadId || v.id("<sos>") != kSosId || v.id("<eos>") != kEosId) {
    throw DataError("vocab reserved ids are not PAD=0, SOS=1, EOS=2");
  }
  return v;
}

nlohmann::json Vocab::to_json() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [token, id] : ids_) doc[token] = id;
  return doc;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw DataError("out-of-vocabulary token '" + token + "'");
  return it->second;
}

std::vector<std::uint8_t> TokenSeq::pad_mask() const {
  std::vector<std::uint8_t> mask(ids.size(), 0);
  for (std::size_t i = static_cast<std::size_t>(eos_pos) + 1; i < ids.size(); ++i) mask[i] = 1;
  return mask;
}

TokenSeq tokenize(std::string_view expr, const Vocab& vocab, int max_len) {
  const auto words = split_words(expr);
  if (static_cast<int>(words.size()) > max_len - 2) {
    throw DataError("expression has " + std::to_string(words.size()) + " words; at most " +
                    std::to_string(max_len - 2) + " fit");
  }
  TokenSeq seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), kPadId);
  seq.ids[0] = kSosId;
  for (std::size_t i = 0; i < words.size(); ++i) seq.ids[i + 1] = vocab.id(words[i]);
  seq.eos_pos = static_cast<int>(words.size()) + 1;
  seq.ids[static_cast<std::size_t>(seq.eos_pos)] = kEosId;
  return seq;
}

TextEncoder::TextEncoder(ParameterStore& store, const RunConfig& config, int vocab_size, Rng& rng)
    : max_len_(config.max_len), heads_(config.text_heads) {
  const int c = config.width;
  token_embedding_ = store.add("text.token_embedding", {vocab_size, c}, Init::kEmbedding, rng);
  position_embedding_ = store.add("text.position_embedding", {max_len_, c}, Init::kEmbedding, rng);
  for (int l = 0; l < config.text_layers; ++l) {
    const std::string p = "text.layer" + std::to_string(l);
    layers_.push_back({LayerNormParams::create(store, p + ".ln1", c, rng), AttentionParams::create(store, p + ".attn", c, rng),
                       LayerNormParams::create(store, p + ".ln2", c, rng),
                       MlpParams::create(store, p + ".mlp", c, config.text_ffn, rng)});
  }
  final_ln_ = LayerNormParams::create(store, "text.final_ln", c, rng);
  pool_w_ = store.add("text.pool.w", {c, config.text_width}, Init::kFanInUniform, rng, c);
  pool_b_ = store.add("text.pool.b", {config.text_width}, Init::kZeros, rng);
}

TextFeatures TextEncoder::encode(const TokenSeq& seq) const {
  if (static_cast<int>(seq.ids.size()) != max_len_) {
    throw ShapeError("encode_text: sequence length " + std::to_string(seq.ids.size()) + " != " + std::to_string(max_len_));
  }
  Tensor x = add(gather_rows(token_embedding_, seq.ids), position_embedding_);
  for (const Layer& layer : layers_) {
    x = add(x, mhsa(layer.ln1(x), layer.attn, heads_, Tensor(), /*causal=*/true));
    x = add(x, layer.mlp(layer.ln2(x)));
  }
  TextFeatures out;
  out.tokens = final_ln_(x);
  const Tensor eos = reshape(select_row(out.tokens, seq.eos_pos), Shape{1, out.tokens.shape()[1]});
  const Tensor pooled = linear(eos, pool_w_, pool_b_);
  out.global = reshape(pooled, Shape{pooled.shape()[1]});
  out.pad_mask = seq.pad_mask();
  return out;
}

}  // namespace cris
