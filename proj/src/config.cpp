#include "ensnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "ensnet/errors.hpp"
#include "presets.hpp"

namespace ensnet {
namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename V>
V get_or(const json& j, const char* key, V fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename V>
V require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return get_or<V>(j, key, V{}, where);
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const char* key, Range fallback, const std::string& where) {
  const auto v = get_or<std::vector<double>>(j, key, {fallback.lo, fallback.hi}, where);
  if (v.size() != 2) throw ConfigError(where + "." + key + ": expected [lo, hi]");
  return {v[0], v[1]};
}

json head_json(const HeadConfig& h) {
  return {{"hidden", {h.hidden1, h.hidden2}},
          {"batchnorm", h.batchnorm},
          {"dropout", h.dropout},
          {"dropconnect", h.dropconnect}};
}

HeadConfig head_from(const json& j, const std::string& where) {
  check_keys(j, {"hidden", "batchnorm", "dropout", "dropconnect"}, where);
  HeadConfig h;
  const auto hidden = get_or<std::vector<std::size_t>>(j, "hidden", {h.hidden1, h.hidden2}, where);
  if (hidden.size() != 2) throw ConfigError(where + ".hidden: expected two layer widths");
  h.hidden1 = hidden[0];
  h.hidden2 = hidden[1];
  h.batchnorm = get_or<bool>(j, "batchnorm", h.batchnorm, where);
  h.dropout = get_or<double>(j, "dropout", h.dropout, where);
  h.dropconnect = get_or<double>(j, "dropconnect", h.dropconnect, where);
  return h;
}

json augment_json(const AugmentSpec& spec, AugmentMode mode, std::size_t copies) {
  return {{"mode", to_string(mode)},
          {"rotate_deg", range_json(spec.rotate_deg)},
          {"scale", range_json(spec.scale)},
          {"shift_frac", range_json(spec.shift_frac)},
          {"shear_deg", range_json(spec.shear_deg)},
          {"static_copies", copies}};
}

std::filesystem::path find_file(const std::filesystem::path& dir, std::string_view subdir, const std::string& name) {
  const std::filesystem::path direct = dir / name;
  if (std::filesystem::exists(direct)) return direct;
  const std::filesystem::path nested = dir / std::string(subdir) / name;
  if (std::filesystem::exists(nested)) return nested;
  throw DataError("missing dataset file " + direct.string(), DataError::Kind::missing_file);
}

}  // namespace

json to_json(const ModelConfig& config) {
  json trunk = json::array();
  for (const TrunkEntry& e : config.trunk) {
    switch (e.kind) {
      case TrunkEntry::Kind::conv:
        trunk.push_back({{"type", "conv"}, {"channels", e.channels}, {"pad", e.zero_pad}, {"batchnorm", e.batchnorm}});
        break;
      case TrunkEntry::Kind::maxpool:
        trunk.push_back({{"type", "maxpool"}});
        break;
      case TrunkEntry::Kind::dropout:
        trunk.push_back({{"type", "dropout"}, {"ratio", e.ratio}});
        break;
    }
  }
  return {{"input_shape", config.input_shape},    {"trunk", trunk},
          {"split_count", config.split_count},    {"num_classes", config.num_classes},
          {"base_head", head_json(config.base_head)}, {"subnet_head", head_json(config.subnet_head)}};
}

ModelConfig model_config_from_json(const json& j) {
  const std::string where = "model";
  check_keys(j, {"name", "input_shape", "trunk", "split_count", "num_classes", "base_head", "subnet_head"}, where);
  ModelConfig c;
  c.name = get_or<std::string>(j, "name", "", where);
  c.input_shape = require<Shape>(j, "input_shape", where);
  if (!j.contains("trunk") || !j.at("trunk").is_array()) throw ConfigError("model: 'trunk' must be an array");
  std::size_t index = 0;
  for (const json& e : j.at("trunk")) {
    const std::string at = "model.trunk[" + std::to_string(index++) + "]";
    const auto type = require<std::string>(e, "type", at);
    if (type == "conv") {
      check_keys(e, {"type", "channels", "pad", "batchnorm"}, at);
      c.trunk.push_back(TrunkEntry::conv(require<std::size_t>(e, "channels", at), get_or<bool>(e, "pad", false, at),
                                         get_or<bool>(e, "batchnorm", true, at)));
    } else if (type == "maxpool") {
      check_keys(e, {"type"}, at);
      c.trunk.push_back(TrunkEntry::maxpool());
    } else if (type == "dropout") {
      check_keys(e, {"type", "ratio"}, at);
      c.trunk.push_back(TrunkEntry::dropout(require<double>(e, "ratio", at)));
    } else {
      throw ConfigError(at + ": unknown type '" + type + "'");
    }
  }
  c.split_count = get_or<std::size_t>(j, "split_count", c.split_count, where);
  c.num_classes = get_or<std::size_t>(j, "num_classes", c.num_classes, where);
  if (j.contains("base_head")) c.base_head = head_from(j.at("base_head"), "model.base_head");
  if (j.contains("subnet_head")) c.subnet_head = head_from(j.at("subnet_head"), "model.subnet_head");
  return c;
}

json to_json(const TrainPlan& plan) {
  json schedule = {{"kind", plan.schedule.kind == LrSchedule::Kind::constant ? "constant" : "step_decay"},
                   {"alpha", plan.schedule.alpha}};
  if (plan.schedule.kind == LrSchedule::Kind::step_decay) {
    schedule["factor"] = plan.schedule.factor;
    schedule["period_epochs"] = plan.schedule.period_epochs;
  }
  return {{"batch_size", plan.batch_size},
          {"epochs", plan.epochs},
          {"alternation", plan.alternation == Alternation::per_batch ? "per_batch" : "per_epoch"},
          {"seed", plan.seed},
          {"schedule", schedule},
          {"adam",
           {{"beta1", plan.adam.beta1},
            {"beta2", plan.adam.beta2},
            {"eps", plan.adam.eps},
            {"weight_decay", plan.adam.weight_decay}}},
          {"checkpoint_every", plan.checkpoint_every},
          {"threads", plan.threads}};
}

TrainPlan train_plan_from_json(const json& j) {
  const std::string where = "train";
  check_keys(j, {"batch_size", "epochs", "alternation", "seed", "schedule", "adam", "checkpoint_every", "threads"},
             where);
  TrainPlan p;
  p.batch_size = get_or<std::size_t>(j, "batch_size", p.batch_size, where);
  p.epochs = get_or<std::uint32_t>(j, "epochs", p.epochs, where);
  const auto alternation = get_or<std::string>(j, "alternation", "per_batch", where);
  if (alternation == "per_batch") {
    p.alternation = Alternation::per_batch;
  } else if (alternation == "per_epoch") {
    p.alternation = Alternation::per_epoch;
  } else {
    throw ConfigError("train.alternation: expected per_batch or per_epoch, got '" + alternation + "'");
  }
  p.seed = get_or<std::uint64_t>(j, "seed", p.seed, where);
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_keys(s, {"kind", "alpha", "factor", "period_epochs"}, "train.schedule");
    const auto kind = get_or<std::string>(s, "kind", "constant", "train.schedule");
    const double alpha = get_or<double>(s, "alpha", 0.001, "train.schedule");
    if (kind == "constant") {
      p.schedule = LrSchedule::constant(alpha);
    } else if (kind == "step_decay") {
      p.schedule = LrSchedule::step_decay(alpha, get_or<double>(s, "factor", 0.1, "train.schedule"),
                                          get_or<std::uint32_t>(s, "period_epochs", 100, "train.schedule"));
    } else {
      throw ConfigError("train.schedule.kind: expected constant or step_decay, got '" + kind + "'");
    }
  }
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    check_keys(a, {"beta1", "beta2", "eps", "weight_decay"}, "train.adam");
    p.adam.beta1 = get_or<double>(a, "beta1", p.adam.beta1, "train.adam");
    p.adam.beta2 = get_or<double>(a, "beta2", p.adam.beta2, "train.adam");
    p.adam.eps = get_or<double>(a, "eps", p.adam.eps, "train.adam");
    p.adam.weight_decay = get_or<double>(a, "weight_decay", p.adam.weight_decay, "train.adam");
  }
  p.adam.alpha = p.schedule.alpha;
  p.checkpoint_every = get_or<std::uint32_t>(j, "checkpoint_every", p.checkpoint_every, where);
  p.threads = get_or<std::size_t>(j, "threads", p.threads, where);
  return p;
}

std::string to_string(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::off:
      return "off";
    case AugmentMode::on:
      return "on";
    case AugmentMode::static_expand:
      return "static";
  }
  return "off";
}

AugmentMode parse_augment_mode(std::string_view text) {
  if (text == "off") return AugmentMode::off;
  if (text == "on") return AugmentMode::on;
  if (text == "static") return AugmentMode::static_expand;
  throw ConfigError("augment mode must be on, off or static, got '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  model.validate();
  plan.validate();
  augment.validate();
  if (dataset.name != "mnist" && dataset.name != "fashion-mnist" && dataset.name != "cifar10") {
    throw ConfigError("dataset.name must be mnist, fashion-mnist or cifar10, got '" + dataset.name + "'");
  }
  const Shape expected = dataset.name == "cifar10" ? Shape{3, 32, 32} : Shape{1, 28, 28};
  if (model.input_shape != expected) {
    throw ConfigError("model input shape " + to_string(model.input_shape) + " does not match dataset " +
                      dataset.name + " " + to_string(expected));
  }
  if (model.num_classes != 10) throw ConfigError("all supported datasets have 10 classes");
  if (augment_mode == AugmentMode::static_expand && static_copies == 0) {
    throw ConfigError("static augmentation needs at least one copy");
  }
}

json to_json(const RunConfig& config) {
  json model = to_json(config.model);
  return {{"name", config.name},
          {"model", model},
          {"dataset",
           {{"name", config.dataset.name},
            {"dir", config.dataset.dir.string()},
            {"train_limit", config.dataset.train_limit},
            {"test_limit", config.dataset.test_limit}}},
          {"train", to_json(config.plan)},
          {"augment", augment_json(config.augment, config.augment_mode, config.static_copies)},
          {"out_dir", config.out_dir.string()}};
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"name", "model", "dataset", "train", "augment", "out_dir"}, "config");
  RunConfig c;
  c.name = get_or<std::string>(j, "name", "", "config");
  if (!j.contains("model")) throw ConfigError("config: missing 'model'");
  c.model = model_config_from_json(j.at("model"));
  if (c.model.name.empty()) c.model.name = c.name;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, {"name", "dir", "train_limit", "test_limit"}, "dataset");
    c.dataset.name = get_or<std::string>(d, "name", c.dataset.name, "dataset");
    c.dataset.dir = get_or<std::string>(d, "dir", "", "dataset");
    c.dataset.train_limit = get_or<std::size_t>(d, "train_limit", 0, "dataset");
    c.dataset.test_limit = get_or<std::size_t>(d, "test_limit", 0, "dataset");
  }
  if (j.contains("train")) c.plan = train_plan_from_json(j.at("train"));
  if (j.contains("augment")) {
    const json& a = j.at("augment");
    check_keys(a, {"mode", "rotate_deg", "scale", "shift_frac", "shear_deg", "static_copies"}, "augment");
    c.augment_mode = parse_augment_mode(get_or<std::string>(a, "mode", "off", "augment"));
    c.augment.rotate_deg = range_from(a, "rotate_deg", c.augment.rotate_deg, "augment");
    c.augment.scale = range_from(a, "scale", c.augment.scale, "augment");
    c.augment.shift_frac = range_from(a, "shift_frac", c.augment.shift_frac, "augment");
    c.augment.shear_deg = range_from(a, "shear_deg", c.augment.shear_deg, "augment");
    c.static_copies = get_or<std::size_t>(a, "static_copies", c.static_copies, "augment");
  }
  c.out_dir = get_or<std::string>(j, "out_dir", "", "config");
  return c;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : detail::presets()) names.emplace_back(name);
  return names;
}

RunConfig load_preset(std::string_view name) {
  for (const auto& [preset, text] : detail::presets()) {
    if (preset == name) return run_config_from_json(json::parse(text));
  }
  std::string known;
  for (const std::string& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return run_config_from_json(json::parse(buffer.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const DatasetConfig& config, Split split) {
  const std::size_t limit = split == Split::train ? config.train_limit : config.test_limit;
  if (config.name == "cifar10") {
    std::vector<std::filesystem::path> files;
    if (split == Split::train) {
      for (int i = 1; i <= 5; ++i) {
        files.push_back(find_file(config.dir, "cifar-10-batches-bin", "data_batch_" + std::to_string(i) + ".bin"));
      }
    } else {
      files.push_back(find_file(config.dir, "cifar-10-batches-bin", "test_batch.bin"));
    }
    return load_cifar10(files, split).head(limit);
  }
  if (config.name != "mnist" && config.name != "fashion-mnist") {
    throw ConfigError("unknown dataset '" + config.name + "'");
  }
  const std::string prefix = split == Split::train ? "train" : "t10k";
  const auto images = find_file(config.dir, config.name, prefix + "-images-idx3-ubyte");
  const auto labels = find_file(config.dir, config.name, prefix + "-labels-idx1-ubyte");
  return load_idx(images, labels, split).head(limit);
}

}  // namespace ensnet
