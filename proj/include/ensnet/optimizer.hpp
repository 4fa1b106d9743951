#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ensnet/layers.hpp"

namespace ensnet {

struct AdamHyper {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Moments and step count for one parameter group. A group that is not
// stepped keeps its state untouched, so frozen parts do not advance t.
template <typename T>
struct AdamState {
  std::string group;
  AdamHyper hyper;
  std::uint64_t t = 0;
  std::vector<std::string> names;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  static AdamState create(std::string group, const AdamHyper& hyper, std::span<Parameter<T>* const> params);
};

// One Adam update of every parameter in the group:
//   m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2
//   theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps)
// with m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).
// grads[i] belongs to params[i]; a null entry is a contract error.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state);

struct LrSchedule {
  enum class Kind { constant, step_decay };
  Kind kind = Kind::constant;
  double alpha = 0.001;
  double factor = 0.1;
  std::uint32_t period_epochs = 100;

  static LrSchedule constant(double alpha) { return {Kind::constant, alpha, 1.0, 1}; }
  static LrSchedule step_decay(double alpha, double factor, std::uint32_t period) {
    return {Kind::step_decay, alpha, factor, period};
  }
};

// Learning rate in effect for 0-based `epoch`. Applied at the start of the epoch.
double apply_schedule(std::int64_t epoch, const LrSchedule& schedule);

}  // namespace ensnet
