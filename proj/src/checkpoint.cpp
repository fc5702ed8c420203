#include "cris/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "cris/image_io.hpp"

namespace cris {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'I', 'S'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  const std::uint8_t* bytes(std::size_t n) {
    if (n > in_.size() - pos_) throw DataError("checkpoint truncated");
    const std::uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T le() {
    const std::uint8_t* p = bytes(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>(v | static_cast<T>(static_cast<T>(p[i]) << (8 * i)));
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CrisModel& model) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kCheckpointVersion);
  nlohmann::json doc = to_json(model.config());
  doc["vocab"] = model.vocab().to_json();
  const std::string text = doc.dump();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  const auto& params = model.parameters().all();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    const Shape& s = p.tensor.shape();
    w.le<std::uint8_t>(static_cast<std::uint8_t>(s.rank()));
    for (int d = 0; d < s.rank(); ++d) w.le<std::uint32_t>(static_cast<std::uint32_t>(s[d]));
    for (double v : p.tensor.data()) w.le<std::uint64_t>(std::bit_cast<std::uint64_t>(v));
  }
  return w.take();
}

std::unique_ptr<CrisModel> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(r.bytes(4), kMagic, 4) != 0) throw DataError("not a checkpoint (bad magic)");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto json_len = r.le<std::uint32_t>();
  const auto* json_bytes = r.bytes(json_len);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_bytes, json_bytes + json_len);
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("checkpoint config is not valid JSON");
  }
  if (!doc.contains("vocab")) throw DataError("checkpoint has no vocabulary");
  const Vocab vocab = Vocab::from_json(doc["vocab"]);
  doc.erase("vocab");
  auto model = std::make_unique<CrisModel>(config_from_json(doc), vocab);

  auto& params = model->parameters();
  const auto count = r.le<std::uint32_t>();
  if (count != params.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, config expects " + std::to_string(params.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.le<std::uint16_t>();
    const auto* name_bytes = r.bytes(name_len);
    const std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    if (!params.contains(name)) throw DataError("checkpoint tensor '" + name + "' is not a model parameter");
    Tensor& t = params.at(name).tensor;
    const auto rank = r.le<std::uint8_t>();
    bool same = rank == t.shape().rank();
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.le<std::uint32_t>();
      same = same && d < t.shape().rank() && dim == static_cast<std::uint32_t>(t.shape()[d]);
    }
    if (!same) throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
    auto& values = t.mutable_value();
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = std::bit_cast<double>(r.le<std::uint64_t>());
    for (double v : values.data()) {
      if (!std::isfinite(v)) throw DataError("checkpoint tensor '" + name + "' holds a non-finite value");
    }
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const CrisModel& model, const std::filesystem::path& path) {
  // Write then rename so a crash never leaves a torn checkpoint behind.
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_file(tmp, encode_checkpoint(model));
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<CrisModel> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace cris
