#include "ensnet/model.hpp"

#include <cstring>

#include "ensnet/errors.hpp"
#include "ensnet/ops.hpp"

namespace ensnet {

void ModelConfig::validate() const {
  if (input_shape.size() != 3) throw ConfigError("model '" + name + "': input_shape must be [C,H,W]");
  for (std::size_t d : input_shape) {
    if (d == 0) throw ConfigError("model '" + name + "': input_shape has a zero extent");
  }
  if (num_classes < 2) throw ConfigError("model '" + name + "': num_classes must be at least 2");
  if (split_count == 0) throw ConfigError("model '" + name + "': split_count must be positive");

  bool has_conv = false;
  for (const TrunkEntry& e : trunk) {
    switch (e.kind) {
      case TrunkEntry::Kind::conv:
        if (e.channels == 0) throw ConfigError("model '" + name + "': conv layer with zero channels");
        has_conv = true;
        break;
      case TrunkEntry::Kind::dropout:
        if (!(e.ratio >= 0.0 && e.ratio < 1.0)) {
          throw ConfigError("model '" + name + "': dropout ratio " + std::to_string(e.ratio) + " outside [0,1)");
        }
        break;
      case TrunkEntry::Kind::maxpool:
        break;
    }
  }
  if (!has_conv) throw ConfigError("model '" + name + "': trunk needs at least one conv layer");

  for (const HeadConfig* head : {&base_head, &subnet_head}) {
    if (head->hidden1 == 0 || head->hidden2 == 0) throw ConfigError("model '" + name + "': head width must be positive");
    if (!(head->dropout >= 0.0 && head->dropout < 1.0) || !(head->dropconnect >= 0.0 && head->dropconnect < 1.0)) {
      throw ConfigError("model '" + name + "': head drop ratios must lie in [0,1)");
    }
  }

  // Spatial feasibility and the split rule.
  const Shape features = feature_shape();
  if (features[0] % split_count != 0) {
    throw ConfigError("model '" + name + "': last conv layer has " + std::to_string(features[0]) +
                      " channels, not divisible by split_count " + std::to_string(split_count));
  }
}

Shape ModelConfig::feature_shape() const {
  if (input_shape.size() != 3) throw ConfigError("model '" + name + "': input_shape must be [C,H,W]");
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  for (const TrunkEntry& e : trunk) {
    if (e.kind == TrunkEntry::Kind::conv) {
      if (!e.zero_pad) {
        if (h < 3 || w < 3) {
          throw ConfigError("model '" + name + "': unpadded conv on " + std::to_string(h) + "x" + std::to_string(w) +
                            " feature-maps");
        }
        h -= 2;
        w -= 2;
      }
      c = e.channels;
    } else if (e.kind == TrunkEntry::Kind::maxpool) {
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
  }
  return {c, h, w};
}

Shape ModelConfig::subnet_input_shape() const {
  Shape s = feature_shape();
  if (split_count == 0 || s[0] % split_count != 0) {
    throw ConfigError("model '" + name + "': " + std::to_string(s[0]) + " channels cannot be split " +
                      std::to_string(split_count) + " ways");
  }
  s[0] /= split_count;
  return s;
}

FcHead FcHead::create(const std::string& prefix, std::size_t in_features, const HeadConfig& config,
                      std::size_t num_classes, Rng& rng) {
  FcHead head;
  head.fc1 = layers::FCLayer<float>::create(prefix + ".fc1", in_features, config.hidden1, rng);
  if (config.batchnorm) head.bn1 = layers::BatchNormLayer<float>::create(prefix + ".bn1", config.hidden1);
  head.dropout = config.dropout;
  head.fc2 = layers::FCLayer<float>::create(prefix + ".fc2", config.hidden1, config.hidden2, rng);
  head.dropconnect = config.dropconnect;
  head.fc3 = layers::FCLayer<float>::create(prefix + ".fc3", config.hidden2, num_classes, rng);
  return head;
}

ParamList FcHead::parameters() {
  ParamList out{&fc1.weight, &fc1.bias};
  if (bn1) {
    out.push_back(&bn1->gamma);
    out.push_back(&bn1->beta);
  }
  for (auto* p : {&fc2.weight, &fc2.bias, &fc3.weight, &fc3.bias}) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Tensor<float>*>> FcHead::buffers() {
  if (!bn1) return {};
  const std::string prefix = bn1->gamma.name.substr(0, bn1->gamma.name.size() - std::strlen(".gamma"));
  return {{prefix + ".running_mean", &bn1->stats.running_mean}, {prefix + ".running_var", &bn1->stats.running_var}};
}

Var<float> FcHead::forward(ParamBinder<float>& binder, const Var<float>& x, Mode mode, Rng* masks,
                           bool update_stats) {
  if (mode == Mode::train && masks == nullptr) throw ContractError("FcHead::forward: train mode needs a mask stream");
  Var<float> h = fc1.forward(binder, x);
  if (bn1) h = bn1->forward(binder, h, mode, update_stats);
  h = ops::relu(h);
  if (mode == Mode::train && dropout > 0.0) {
    h = layers::dropout(h, layers::sample_keep_mask<float>(h.shape(), dropout, *masks), static_cast<float>(dropout));
  }
  if (mode == Mode::train && dropconnect > 0.0) {
    const auto mask = layers::DropMask<float>::sample(layers::DropKind::dropconnect, fc2.weight.value.shape(),
                                                      dropconnect, *masks);
    h = layers::dropconnect_fc(binder, h, fc2, &mask);
  } else {
    h = fc2.forward(binder, h);
  }
  h = ops::relu(h);
  return fc3.forward(binder, h);
}

EnsNetModel EnsNetModel::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  EnsNetModel model;
  model.config_ = config;

  std::size_t channels = config.input_shape[0];
  std::size_t conv_index = 0;
  for (std::size_t i = 0; i < config.trunk.size(); ++i) {
    const TrunkEntry& e = config.trunk[i];
    TrunkLayer layer{e, std::nullopt, std::nullopt};
    if (e.kind == TrunkEntry::Kind::conv) {
      Rng rng(seed, StreamPurpose::init, {0, conv_index});
      const std::string name = "trunk.conv" + std::to_string(conv_index);
      layer.conv = layers::Conv2dLayer<float>::create(name, channels, e.channels, e.zero_pad, rng);
      if (e.batchnorm) layer.bn = layers::BatchNormLayer<float>::create("trunk.bn" + std::to_string(conv_index), e.channels);
      channels = e.channels;
      ++conv_index;
    }
    model.trunk_.push_back(std::move(layer));
  }

  const Shape features = config.feature_shape();
  const std::size_t full = numel(features);
  const std::size_t block = full / config.split_count;
  {
    Rng rng(seed, StreamPurpose::init, {1});
    model.base_head_ = FcHead::create("base", full, config.base_head, config.num_classes, rng);
  }
  for (std::size_t i = 0; i < config.split_count; ++i) {
    Rng rng(seed, StreamPurpose::init, {2, i});
    model.subnets_.push_back(
        FcHead::create("subnet" + std::to_string(i), block, config.subnet_head, config.num_classes, rng));
  }
  return model;
}

std::pair<std::size_t, std::size_t> EnsNetModel::subnet_channels(std::size_t subnet) const {
  if (subnet >= subnets_.size()) throw ContractError("subnet index " + std::to_string(subnet) + " out of range");
  const std::size_t per = config_.feature_shape()[0] / subnets_.size();
  return {subnet * per, (subnet + 1) * per};
}

Var<float> EnsNetModel::trunk_forward(ParamBinder<float>& binder, const Var<float>& x, Mode mode, Rng* masks,
                                      bool update_stats) {
  const Shape& s = x.shape();
  if (s.size() != 4 || !std::equal(s.begin() + 1, s.end(), config_.input_shape.begin())) {
    throw DimensionError("model '" + config_.name + "' expects input [N," + to_string(config_.input_shape).substr(1) +
                         ", got " + to_string(s));
  }
  if (mode == Mode::train && masks == nullptr) throw ContractError("trunk_forward: train mode needs a mask stream");
  ++trunk_evaluations_;
  Var<float> h = x;
  for (TrunkLayer& layer : trunk_) {
    switch (layer.spec.kind) {
      case TrunkEntry::Kind::conv:
        h = layer.conv->forward(binder, h);
        if (layer.bn) h = layer.bn->forward(binder, h, mode, update_stats);
        h = ops::relu(h);
        break;
      case TrunkEntry::Kind::maxpool:
        h = layers::maxpool2x2_ceil(h);
        break;
      case TrunkEntry::Kind::dropout:
        if (mode == Mode::train && layer.spec.ratio > 0.0) {
          h = layers::dropout(h, layers::sample_keep_mask<float>(h.shape(), layer.spec.ratio, *masks),
                              static_cast<float>(layer.spec.ratio));
        }
        break;
    }
  }
  return h;
}

ParamList EnsNetModel::trunk_parameters() {
  ParamList out;
  for (TrunkLayer& layer : trunk_) {
    if (layer.conv) {
      out.push_back(&layer.conv->weight);
      out.push_back(&layer.conv->bias);
    }
    if (layer.bn) {
      out.push_back(&layer.bn->gamma);
      out.push_back(&layer.bn->beta);
    }
  }
  return out;
}

ParamList EnsNetModel::base_parameters() {
  ParamList out = trunk_parameters();
  for (Parameter<float>* p : base_head_.parameters()) out.push_back(p);
  return out;
}

ParamList EnsNetModel::subnet_parameters(std::size_t i) { return subnets_.at(i).parameters(); }

ParamList EnsNetModel::all_parameters() {
  ParamList out = base_parameters();
  for (FcHead& head : subnets_) {
    for (Parameter<float>* p : head.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor<float>*>> EnsNetModel::buffers() {
  std::vector<std::pair<std::string, Tensor<float>*>> out;
  std::size_t conv_index = 0;
  for (TrunkLayer& layer : trunk_) {
    if (!layer.conv) continue;
    if (layer.bn) {
      const std::string prefix = "trunk.bn" + std::to_string(conv_index);
      out.emplace_back(prefix + ".running_mean", &layer.bn->stats.running_mean);
      out.emplace_back(prefix + ".running_var", &layer.bn->stats.running_var);
    }
    ++conv_index;
  }
  for (auto& b : base_head_.buffers()) out.push_back(b);
  for (FcHead& head : subnets_) {
    for (auto& b : head.buffers()) out.push_back(b);
  }
  return out;
}

namespace {

std::size_t count(const ParamList& params) {
  std::size_t total = 0;
  for (const Parameter<float>* p : params) total += p->value.size();
  return total;
}

}  // namespace

std::size_t EnsNetModel::parameter_count() { return count(all_parameters()); }
std::size_t EnsNetModel::trunk_parameter_count() { return count(trunk_parameters()); }

template <typename T>
std::vector<Tensor<T>> split_feature_maps(const Tensor<T>& feature_maps, std::size_t k) {
  if (feature_maps.rank() < 2) {
    throw DimensionError("split_feature_maps: needs [N,C,...], got " + to_string(feature_maps.shape()));
  }
  const std::size_t channels = feature_maps.dim(1);
  if (k == 0 || channels % k != 0) {
    throw ConfigError("split_feature_maps: " + std::to_string(channels) + " channels cannot be split into " +
                      std::to_string(k) + " equal blocks");
  }
  const std::size_t batch = feature_maps.dim(0);
  const std::size_t inner = feature_maps.size() / (batch * channels);
  const std::size_t per = channels / k;
  std::vector<Tensor<T>> out;
  out.reserve(k);
  for (std::size_t b = 0; b < k; ++b) {
    Shape shape = feature_maps.shape();
    shape[1] = per;
    Tensor<T> block(shape);
    for (std::size_t n = 0; n < batch; ++n) {
      std::memcpy(block.ptr() + n * per * inner, feature_maps.ptr() + (n * channels + b * per) * inner,
                  per * inner * sizeof(T));
    }
    out.push_back(std::move(block));
  }
  return out;
}

template std::vector<Tensor<float>> split_feature_maps<float>(const Tensor<float>&, std::size_t);
template std::vector<Tensor<double>> split_feature_maps<double>(const Tensor<double>&, std::size_t);

ForwardResult forward_all(EnsNetModel& model, const Tensor<float>& x, Mode mode, Rng* masks) {
  Tape<float> tape;
  ParamBinder<float> binder(tape, false);
  const Var<float> input = tape.watch(x, false);
  const Var<float> features = model.trunk_forward(binder, input, mode, masks);

  ForwardResult result;
  result.base_logits = model.base_head().forward(binder, features, mode, masks).value();
  for (std::size_t i = 0; i < model.split_count(); ++i) {
    const auto [begin, end] = model.subnet_channels(i);
    const Var<float> block = ops::slice_channels(features, begin, end);
    result.subnet_logits.push_back(model.subnet(i).forward(binder, block, mode, masks).value());
  }
  return result;
}

}  // namespace ensnet
