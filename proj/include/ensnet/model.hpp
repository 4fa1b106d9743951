#pragma once

// EnsNet: a convolutional trunk whose final feature-maps feed
//   * the base CNN head, which reads all channels, and
//   * k subnetwork heads, the i-th reading channels [i*C/k, (i+1)*C/k).
// All heads share one three-weight-layer shape:
//   FC(h1) -> BatchNorm -> ReLU -> Dropout -> Dropconnect FC(h2) -> ReLU -> FC(classes)

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ensnet/layers.hpp"

namespace ensnet {

struct TrunkEntry {
  enum class Kind { conv, maxpool, dropout };

  Kind kind = Kind::conv;
  std::size_t channels = 0;  // conv
  bool zero_pad = false;     // conv
  bool batchnorm = true;     // conv: followed by BatchNorm before the ReLU
  double ratio = 0.0;        // dropout

  static TrunkEntry conv(std::size_t channels, bool zero_pad, bool batchnorm = true) {
    return {Kind::conv, channels, zero_pad, batchnorm, 0.0};
  }
  static TrunkEntry maxpool() { return {Kind::maxpool, 0, false, false, 0.0}; }
  static TrunkEntry dropout(double ratio) { return {Kind::dropout, 0, false, false, ratio}; }

  bool operator==(const TrunkEntry&) const = default;
};

struct HeadConfig {
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 512;
  bool batchnorm = true;
  double dropout = 0.5;
  double dropconnect = 0.5;

  bool operator==(const HeadConfig&) const = default;
};

struct ModelConfig {
  std::string name;
  Shape input_shape;  // [C, H, W]
  std::vector<TrunkEntry> trunk;
  std::size_t split_count = 10;
  HeadConfig base_head;
  HeadConfig subnet_head;
  std::size_t num_classes = 10;

  // Throws ConfigError naming the first violated rule.
  void validate() const;
  // [C, H, W] of the final feature-maps, by shape inference alone.
  Shape feature_shape() const;
  // [C/k, H, W] seen by each subnetwork.
  Shape subnet_input_shape() const;

  bool operator==(const ModelConfig&) const = default;
};

using ParamList = std::vector<Parameter<float>*>;

struct TrunkLayer {
  TrunkEntry spec;
  std::optional<layers::Conv2dLayer<float>> conv;
  std::optional<layers::BatchNormLayer<float>> bn;
};

struct FcHead {
  layers::FCLayer<float> fc1;
  std::optional<layers::BatchNormLayer<float>> bn1;
  double dropout = 0.0;
  layers::FCLayer<float> fc2;
  double dropconnect = 0.0;
  layers::FCLayer<float> fc3;

  static FcHead create(const std::string& prefix, std::size_t in_features, const HeadConfig& config,
                       std::size_t num_classes, Rng& rng);

  ParamList parameters();
  std::vector<std::pair<std::string, Tensor<float>*>> buffers();

  // x: [N, in_features] (or any [N, ...], flattened). Train mode needs `masks`.
  Var<float> forward(ParamBinder<float>& binder, const Var<float>& x, Mode mode, Rng* masks,
                     bool update_stats = true);
};

class EnsNetModel {
 public:
  // Deterministic given (config, seed). Each part draws its initial weights
  // from its own stream, so parts are independently initialized.
  static EnsNetModel build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t split_count() const noexcept { return subnets_.size(); }
  std::pair<std::size_t, std::size_t> subnet_channels(std::size_t subnet) const;

  // Trunk over x:[N,C,H,W] -> final feature-maps. Train mode needs `masks`.
  // Batchnorm running statistics move only in train mode with update_stats set.
  Var<float> trunk_forward(ParamBinder<float>& binder, const Var<float>& x, Mode mode, Rng* masks,
                           bool update_stats = true);

  FcHead& base_head() noexcept { return base_head_; }
  FcHead& subnet(std::size_t i) { return subnets_.at(i); }

  ParamList trunk_parameters();
  ParamList base_parameters();  // trunk + base head
  ParamList subnet_parameters(std::size_t i);
  ParamList all_parameters();
  // Batchnorm running statistics, by name.
  std::vector<std::pair<std::string, Tensor<float>*>> buffers();

  std::size_t parameter_count();
  std::size_t trunk_parameter_count();

  // Number of trunk evaluations since construction (instrumentation).
  std::size_t trunk_evaluations() const noexcept { return trunk_evaluations_; }

 private:
  ModelConfig config_;
  std::vector<TrunkLayer> trunk_;
  FcHead base_head_;
  std::vector<FcHead> subnets_;
  std::size_t trunk_evaluations_ = 0;
};

// k contiguous channel blocks of [N,C,H,W] feature-maps, in order.
template <typename T>
std::vector<Tensor<T>> split_feature_maps(const Tensor<T>& feature_maps, std::size_t k);

struct ForwardResult {
  Tensor<float> base_logits;                 // [N, classes]
  std::vector<Tensor<float>> subnet_logits;  // k x [N, classes]
};

// One trunk evaluation shared by the base head and all subnetworks.
// Train mode needs `masks`; no gradients are recorded.
ForwardResult forward_all(EnsNetModel& model, const Tensor<float>& x, Mode mode, Rng* masks = nullptr);

}  // namespace ensnet
