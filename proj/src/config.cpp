#include "cris/config.hpp"

#include "cris/tensor.hpp"

namespace cris {

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::paper() {
  RunConfig c;
  c.profile = "paper";
  c.image_size = 416;
  c.max_len = 17;
  c.width = 512;
  c.text_width = 1024;
  c.joint_width = 512;
  c.stem = {64, 256};
  c.backbone = {512, 1024, 2048};
  c.text_layers = 12;
  c.text_heads = 8;
  c.text_ffn = 2048;
  c.decoder = {.n_layers = 3, .n_heads = 8, .d_ffn = 2048};
  c.optimizer = {.lr = 1e-4, .decay_factor = 0.1, .decay_epoch = 35, .epochs = 50, .batch_size = 64};
  c.augment = false;
  return c;
}

RunConfig RunConfig::for_profile(const std::string& profile) {
  if (profile == "desk") return desk();
  if (profile == "paper") return paper();
  throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
  if (image_size < 32 || image_size % 32 != 0) fail("image_size must be a positive multiple of 32");
  if (max_len < 2) fail("max_len must be at least 2");
  if (width < 4 || width % 4 != 0) fail("width must be a positive multiple of 4");
  if (text_width < 1 || joint_width < 1) fail("text_width and joint_width must be positive");
  for (int s : stem)
    if (s < 1) fail("stem widths must be positive");
  for (int b : backbone)
    if (b < 1) fail("backbone widths must be positive");
  if (text_layers < 1 || text_heads < 1 || width % text_heads != 0) fail("text_heads must divide width");
  if (text_ffn < 1) fail("text_ffn must be positive");
  if (decoder.n_layers < 1 || decoder.n_heads < 1 || width % decoder.n_heads != 0) {
    fail("decoder.n_heads must divide width and n_layers must be positive");
  }
  if (decoder.d_ffn < 1) fail("decoder.d_ffn must be positive");
  if (!(optimizer.lr > 0) || !(optimizer.decay_factor > 0)) fail("lr and decay_factor must be positive");
  if (optimizer.epochs < 1 || optimizer.batch_size < 1 || optimizer.decay_epoch < 1) {
    fail("epochs, batch_size and decay_epoch must be positive");
  }
  if (val_count < 0) fail("val_count must be non-negative");
  if (init != "fan_in_uniform") fail("init must be fan_in_uniform");
}

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"profile", c.profile},
      {"image_size", c.image_size},
      {"max_len", c.max_len},
      {"width", c.width},
      {"text_width", c.text_width},
      {"joint_width", c.joint_width},
      {"stem", c.stem},
      {"backbone", c.backbone},
      {"text_layers", c.text_layers},
      {"text_heads", c.text_heads},
      {"text_ffn", c.text_ffn},
      {"decoder", {{"n_layers", c.decoder.n_layers}, {"n_heads", c.decoder.n_heads}, {"d_ffn", c.decoder.d_ffn}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"decay_factor", c.optimizer.decay_factor},
        {"decay_epoch", c.optimizer.decay_epoch},
        {"epochs", c.optimizer.epochs},
        {"batch_size", c.optimizer.batch_size}}},
      {"ablation", {{"con", c.ablation.con}, {"dec", c.ablation.dec}}},
      {"seed", c.seed},
      {"val_count", c.val_count},
      {"init", c.init},
      {"augment", c.augment},
  };
}

RunConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  try {
    RunConfig c = RunConfig::for_profile(doc.value("profile", std::string("desk")));
    auto take = [&](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key)) obj.at(key).get_to(field);
    };
    take(doc, "image_size", c.image_size);
    take(doc, "max_len", c.max_len);
    take(doc, "width", c.width);
    take(doc, "text_width", c.text_width);
    take(doc, "joint_width", c.joint_width);
    take(doc, "stem", c.stem);
    take(doc, "backbone", c.backbone);
    take(doc, "text_layers", c.text_layers);
    take(doc, "text_heads", c.text_heads);
    take(doc, "text_ffn", c.text_ffn);
    if (doc.contains("decoder")) {
      const auto& d = doc.at("decoder");
      take(d, "n_layers", c.decoder.n_layers);
      take(d, "n_heads", c.decoder.n_heads);
      take(d, "d_ffn", c.decoder.d_ffn);
    }
    if (doc.contains("optimizer")) {
      const auto& o = doc.at("optimizer");
      take(o, "lr", c.optimizer.lr);
      take(o, "decay_factor", c.optimizer.decay_factor);
      take(o, "decay_epoch", c.optimizer.decay_epoch);
      take(o, "epochs", c.optimizer.epochs);
      take(o, "batch_size", c.optimizer.batch_size);
    }
    if (doc.contains("ablation")) {
      const auto& a = doc.at("ablation");
      take(a, "con", c.ablation.con);
      take(a, "dec", c.ablation.dec);
    }
    take(doc, "seed", c.seed);
    take(doc, "val_count", c.val_count);
    take(doc, "init", c.init);
    take(doc, "augment", c.augment);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

}  // namespace cris
