#pragma once

// The layer set needed by the EnsNet base CNN and its subnetworks:
// 3x3 convolution, ceil-mode 2x2 max pooling, batch normalization, dropout,
// dropconnect, fully connected, and softmax cross-entropy.
//
// Each layer comes in two forms: a functional op over tape Vars (used by the
// gradient checks in float64) and a small parameter-holding struct whose
// forward() binds its parameters through a ParamBinder.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ensnet/rng.hpp"
#include "ensnet/tape.hpp"

namespace ensnet {

enum class Mode { train, eval };

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

// Maps model parameters onto leaves of one tape.
template <typename T>
class ParamBinder {
 public:
  ParamBinder(Tape<T>& tape, bool trainable) : tape_(&tape), trainable_(trainable) {}

  Var<T> bind(const Parameter<T>& param);
  // The Var a parameter was bound to, or nullptr.
  const Var<T>* find(const Parameter<T>& param) const;

  Tape<T>& tape() const noexcept { return *tape_; }
  bool trainable() const noexcept { return trainable_; }

 private:
  Tape<T>* tape_;
  bool trainable_;
  std::map<const Parameter<T>*, Var<T>> bound_;
};

namespace layers {

inline constexpr double kBatchNormEps = 2e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// --- functional ops -------------------------------------------------------

// Stride-1 3x3 cross-correlation. x:[N,C,H,W], weight:[O,C,3,3], bias:[O].
// Padding 1 when zero_pad, else 0.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, bool zero_pad);

// 2x2 windows, stride 2, ceil mode. Gradient goes to the first maximum of each window.
template <typename T>
Var<T> maxpool2x2_ceil(const Var<T>& x);

template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

// Per-channel normalization over axis 1 of [N,C] or [N,C,H,W].
// train: batch statistics, and `stats` (when non-null) is updated as
//   running = momentum * running + (1 - momentum) * batch   (unbiased variance).
// eval: running statistics from `stats`, which must be non-null.
template <typename T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>* stats, Mode mode,
                 T eps = T(kBatchNormEps), T momentum = T(kBatchNormMomentum));

// x * mask / (1 - ratio). mask entries are 0 or 1.
template <typename T>
Var<T> dropout(const Var<T>& x, const Tensor<T>& mask, T ratio);

// x:[N,in], weight:[out,in], bias:[out] -> x * weight^T + bias
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// x * (mask ⊙ weight)^T / (1 - ratio) + bias. One mask for the whole batch.
template <typename T>
Var<T> dropconnect_linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const Tensor<T>& mask,
                          T ratio);

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels);

// Row-wise softmax of [N,K] logits.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// Bernoulli(1 - ratio) keep-mask of the given shape.
template <typename T>
Tensor<T> sample_keep_mask(const Shape& shape, double ratio, Rng& rng);

// --- parameterized layers ---------------------------------------------------

template <typename T>
struct Conv2dLayer {
  Parameter<T> weight;  // [out, in, 3, 3]
  Parameter<T> bias;    // [out]
  bool zero_pad = true;

  // He-normal weights, zero bias.
  static Conv2dLayer create(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                            bool zero_pad, Rng& rng);

  std::size_t in_channels() const { return weight.value.dim(1); }
  std::size_t out_channels() const { return weight.value.dim(0); }
  std::size_t output_extent(std::size_t input_extent) const { return zero_pad ? input_extent : input_extent - 2; }

  Var<T> forward(ParamBinder<T>& binder, const Var<T>& x) const;
};

template <typename T>
struct BatchNormLayer {
  Parameter<T> gamma;
  Parameter<T> beta;
  BatchNormStats<T> stats;
  T eps = T(kBatchNormEps);
  T momentum = T(kBatchNormMomentum);

  static BatchNormLayer create(const std::string& name, std::size_t channels);

  // Running statistics are updated only when mode is train and update_stats is set.
  Var<T> forward(ParamBinder<T>& binder, const Var<T>& x, Mode mode, bool update_stats = true);
};

template <typename T>
struct FCLayer {
  Parameter<T> weight;  // [out, in]
  Parameter<T> bias;    // [out]

  static FCLayer create(const std::string& name, std::size_t in_features, std::size_t out_features, Rng& rng);

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }

  // Flattens x to [N, features] first.
  Var<T> forward(ParamBinder<T>& binder, const Var<T>& x) const;
};

enum class DropKind { dropout, dropconnect };

template <typename T>
struct DropMask {
  DropKind kind = DropKind::dropout;
  double ratio = 0.0;
  Tensor<T> mask;

  static DropMask sample(DropKind kind, const Shape& shape, double ratio, Rng& rng) {
    return DropMask{kind, ratio, sample_keep_mask<T>(shape, ratio, rng)};
  }
};

// Plain FC when mask is null (eval), masked weights otherwise.
template <typename T>
Var<T> dropconnect_fc(ParamBinder<T>& binder, const Var<T>& x, const FCLayer<T>& layer, const DropMask<T>* mask);

}  // namespace layers
}  // namespace ensnet
