#include "bprg/config.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bprg/error.hpp"

namespace bprg {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key);
  }

  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(key_path(key) + ": missing required key");
    return doc_.at(key);
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(key_path(key) + ": missing required key");
    }
    const auto& v = doc_.at(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(key_path(key) + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(key_path(key) + ": missing required key");
    }
    const auto& v = doc_.at(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
    return v.get<std::string>();
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
    return v.get<bool>();
  }

  template <typename Enum>
  Enum choice(const std::string& key, Enum fallback, std::initializer_list<std::pair<const char*, Enum>> options) {
    if (!has(key)) return fallback;
    const std::string got = text(key);
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (got == name) return value;
      allowed += allowed.empty() ? name : std::string("|") + name;
    }
    throw ConfigError(key_path(key) + ": '" + got + "' is not one of " + allowed);
  }

  void reject_unknown() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()) + ": unknown key");
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void check_fraction(const Section& sec, const std::string& key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(sec.key_path(key) + ": " + std::to_string(v) + " outside [0, 1]");
}

std::size_t parse_size(std::string_view s, std::string_view whole) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("bad layer '" + std::string(whole) + "'");
  return v;
}

}  // namespace

LayerSpec parse_layer(std::string_view text) {
  if (text == "relu") return Relu{};
  if (text == "flatten") return Flatten{};
  const auto open = text.find('(');
  const auto comma = text.find(',');
  if (open == std::string_view::npos || comma == std::string_view::npos || text.back() != ')' || comma < open)
    throw ConfigError("bad layer '" + std::string(text) + "'");
  const auto kind = text.substr(0, open);
  const auto a = parse_size(text.substr(open + 1, comma - open - 1), text);
  const auto b = parse_size(text.substr(comma + 1, text.size() - comma - 2), text);
  if (kind == "dense") return Dense{a, b};
  if (kind == "conv3x3") return Conv3x3{a, b};
  throw ConfigError("bad layer '" + std::string(text) + "'");
}

ExperimentConfig parse_config_text(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  Section root(doc, "");

  if (root.has("seed")) {
    const auto& s = root.at("seed");
    if (!s.is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }

  {
    Section data(root.at("data"), "data");
    auto& d = cfg.data;
    if (!data.has("source")) throw ConfigError("data.source: missing required key");
    d.source = data.choice("source", DataConfig::Source::blobs,
                           {{"blobs", DataConfig::Source::blobs}, {"idx", DataConfig::Source::idx}});
    d.train_size = data.count("train_size", d.train_size);
    d.test_size = data.count("test_size", d.test_size);
    if (d.source == DataConfig::Source::blobs) {
      d.features = data.count("features", d.features);
      d.classes = data.count("classes", d.classes);
      d.spread = data.number("spread", d.spread);
      if (!(d.spread >= 0)) throw ConfigError("data.spread: must be non-negative");
    } else {
      d.train_images = data.text("train_images", d.train_images);
      d.train_labels = data.text("train_labels", d.train_labels);
      d.test_images = data.text("test_images", d.test_images);
      d.test_labels = data.text("test_labels", d.test_labels);
      d.layout = data.choice("layout", IdxLayout::flat, {{"flat", IdxLayout::flat}, {"image", IdxLayout::image}});
    }
    data.reject_unknown();
  }

  {
    Section model(root.at("model"), "model");
    const auto& layers = model.at("layers");
    if (!layers.is_array() || layers.empty()) throw ConfigError("model.layers: expected a non-empty array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].is_string()) throw ConfigError("model.layers[" + std::to_string(i) + "]: expected a string");
      try {
        cfg.model.push_back(parse_layer(layers[i].get<std::string>()));
      } catch (const ConfigError& e) {
        throw ConfigError("model.layers[" + std::to_string(i) + "]: " + e.what());
      }
    }
    model.reject_unknown();
  }

  if (root.has("optimizer")) {
    Section opt(root.at("optimizer"), "optimizer");
    auto& o = cfg.optimizer;
    o.learning_rate = opt.number("lr", o.learning_rate);
    o.momentum = opt.number("momentum", o.momentum);
    o.batch_size = opt.count("batch_size", o.batch_size);
    o.pretrain_epochs = opt.count("pretrain_epochs", o.pretrain_epochs);
    o.finetune_lr_scale = opt.number("finetune_lr_scale", o.finetune_lr_scale);
    opt.reject_unknown();
  }

  const std::initializer_list<std::pair<const char*, PruneMode>> modes = {{"one-shot", PruneMode::one_shot},
                                                                          {"iterative", PruneMode::iterative}};
  {
    Section prune(root.at("prune"), "prune");
    auto& p = cfg.prune;
    p.mode = prune.choice("mode", PruneMode::one_shot, modes);
    p.s_final = prune.number("s_final");
    check_fraction(prune, "s_final", p.s_final);
    p.s_init = prune.number("s_init", 0.0);
    check_fraction(prune, "s_init", p.s_init);
    p.steps = prune.count("steps", 1);
    p.interpolation = prune.choice("interpolation", Interpolation::cubic,
                                   {{"cubic", Interpolation::cubic}, {"linear", Interpolation::linear}});
    p.finetune_epochs = prune.count("finetune_epochs", 3);
    p.scope = prune.choice("scope", PruneScope::global, {{"global", PruneScope::global}, {"layerwise", PruneScope::layerwise}});
    prune.reject_unknown();
    p.validate();
  }

  {
    Section regrow(root.at("regrow"), "regrow");
    auto& r = cfg.regrow;
    r.mode = regrow.choice("mode", PruneMode::one_shot, modes);
    r.s_start = regrow.number("s_start", cfg.prune.s_final);
    check_fraction(regrow, "s_start", r.s_start);
    r.s_end = regrow.number("s_end");
    check_fraction(regrow, "s_end", r.s_end);
    r.steps = regrow.count("steps", 1);
    r.criterion = regrow.choice("criterion", RegrowCriterion::gradient,
                                {{"gradient", RegrowCriterion::gradient},
                                 {"random", RegrowCriterion::random},
                                 {"rewind", RegrowCriterion::rewind_magnitude}});
    r.init = regrow.choice("init", RegrowInit::zero, {{"zero", RegrowInit::zero}, {"rewind", RegrowInit::rewind}});
    r.finetune_epochs = regrow.count("finetune_epochs", 3);
    r.scoring_batch_size = regrow.count("scoring_batch_size", 512);
    regrow.reject_unknown();
  }

  if (root.has("eval")) {
    Section eval(root.at("eval"), "eval");
    cfg.eval.pretrain_every = eval.count("pretrain_every", 0);
    cfg.eval.record_elapsed = eval.flag("record_elapsed", false);
    eval.reject_unknown();
  }

  root.reject_unknown();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace bprg
