#include "ensnet/optimizer.hpp"

#include <cmath>
#include <type_traits>

#include "ensnet/errors.hpp"
#include "ensnet/kernels/kernels.hpp"
#include "ensnet/kernels/scalar.hpp"

namespace ensnet {

template <typename T>
AdamState<T> AdamState<T>::create(std::string group, const AdamHyper& hyper, std::span<Parameter<T>* const> params) {
  AdamState state;
  state.group = std::move(group);
  state.hyper = hyper;
  for (const Parameter<T>* p : params) {
    state.names.push_back(p->name);
    state.m.emplace_back(p->value.shape());
    state.v.emplace_back(p->value.shape());
  }
  return state;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ContractError("adam_step: group '" + state.group + "' has " + std::to_string(state.m.size()) +
                        " parameters, got " + std::to_string(params.size()) + " params and " +
                        std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i] == nullptr) throw ContractError("adam_step: missing gradient for parameter '" + params[i]->name + "'");
    if (grads[i]->size() != params[i]->value.size() || state.m[i].shape() != params[i]->value.shape()) {
      throw DimensionError("adam_step: gradient " + to_string(grads[i]->shape()) + " or moments " +
                           to_string(state.m[i].shape()) + " do not match parameter '" + params[i]->name + "' " +
                           to_string(params[i]->value.shape()));
    }
  }

  state.t += 1;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.t);
  const double fix1 = 1.0 / (1.0 - std::pow(h.beta1, t));
  const double fix2 = 1.0 / (1.0 - std::pow(h.beta2, t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* theta = params[i]->value.ptr();
    const T* g = grads[i]->ptr();
    const std::size_t n = params[i]->value.size();
    if constexpr (std::is_same_v<T, float>) {
      const kernels::AdamCoefficients c{
          static_cast<float>(h.beta1),     static_cast<float>(h.beta2), static_cast<float>(h.eps),
          static_cast<float>(h.alpha),     static_cast<float>(fix1),    static_cast<float>(fix2),
          static_cast<float>(h.weight_decay),
      };
      kernels::active().adam_update(theta, g, state.m[i].ptr(), state.v[i].ptr(), n, c);
    } else {
      kernels::scalar::adam_update<T>(theta, g, state.m[i].ptr(), state.v[i].ptr(), n, T(h.beta1), T(h.beta2),
                                      T(h.eps), T(h.alpha), T(fix1), T(fix2), T(h.weight_decay));
    }
  }
}

double apply_schedule(std::int64_t epoch, const LrSchedule& schedule) {
  if (epoch < 0) throw ContractError("apply_schedule: negative epoch " + std::to_string(epoch));
  switch (schedule.kind) {
    case LrSchedule::Kind::constant:
      return schedule.alpha;
    case LrSchedule::Kind::step_decay: {
      if (schedule.period_epochs == 0) throw ConfigError("apply_schedule: step decay period must be positive");
      const auto steps = epoch / static_cast<std::int64_t>(schedule.period_epochs);
      return schedule.alpha * std::pow(schedule.factor, static_cast<double>(steps));
    }
  }
  return schedule.alpha;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::span<Parameter<float>* const>, std::span<const Tensor<float>* const>,
                               AdamState<float>&);
template void adam_step<double>(std::span<Parameter<double>* const>, std::span<const Tensor<double>* const>,
                                AdamState<double>&);

}  // namespace ensnet
