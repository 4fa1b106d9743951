#include <cmath>
#include <vector>

#include "doctest.h"
#include "ensnet/errors.hpp"
#include "ensnet/optimizer.hpp"
#include "../support/adam_oracle.hpp"

using namespace ensnet;
using namespace ensnet::testing;

TEST_CASE("single step from theta=1 with g=1") {
  Parameter<double> p{"x", TensorD::scalar(1.0)};
  std::vector<Parameter<double>*> params{&p};
  auto state = AdamState<double>::create("g", AdamHyper{}, params);
  const TensorD g = TensorD::scalar(1.0);
  std::vector<const TensorD*> grads{&g};
  adam_step<double>(params, grads, state);
  CHECK(std::fabs(p.value.item() - 0.99900000001) < 1e-12);
  CHECK(state.t == 1);
}

TEST_CASE("ten-step scalar trace matches the float64 reference") {
  Parameter<double> p{"x", TensorD::scalar(1.5)};
  std::vector<Parameter<double>*> params{&p};
  auto state = AdamState<double>::create("g", AdamHyper{}, params);
  for (double expected : kScalarQuadratic) {
    const TensorD g = TensorD::scalar(2.0 * p.value.item());
    std::vector<const TensorD*> grads{&g};
    adam_step<double>(params, grads, state);
    CHECK(std::fabs(p.value.item() - expected) < 1e-7);
  }
}

TEST_CASE("ten-step matrix trace matches the float64 reference") {
  AdamHyper h;
  h.alpha = 0.01;
  const auto trace = adam_matrix_trace<double>(h, 10);
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(trace[t][i] - kMatrix[t][i]) < 1e-7);
  }
  h.weight_decay = 0.1;
  const auto decayed = adam_matrix_trace<double>(h, 10);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(decayed.back()[i] - kMatrixDecayFinal[i]) < 1e-7);
}

TEST_CASE("float32 path follows the reference to single precision") {
  AdamHyper h;
  h.alpha = 0.01;
  const auto trace = adam_matrix_trace<float>(h, 10);
  for (std::size_t i = 0; i < 6; ++i) CHECK(trace.back()[i] == doctest::Approx(kMatrix.back()[i]).epsilon(1e-5));
}

TEST_CASE("missing gradient names the parameter") {
  Parameter<float> p{"trunk.conv0.weight", TensorF({2})};
  std::vector<Parameter<float>*> params{&p};
  auto state = AdamState<float>::create("base", AdamHyper{}, params);
  std::vector<const TensorF*> grads{nullptr};
  CHECK_THROWS_WITH_AS(adam_step<float>(params, grads, state), doctest::Contains("trunk.conv0.weight"), ContractError);
  CHECK(state.t == 0);
}

TEST_CASE("step decay schedule") {
  const LrSchedule s = LrSchedule::step_decay(0.001, 0.1, 100);
  CHECK(apply_schedule(0, s) == doctest::Approx(0.001));
  CHECK(std::fabs(apply_schedule(99, s) - 0.001) < 1e-15);
  CHECK(std::fabs(apply_schedule(100, s) - 0.0001) < 1e-15);
  CHECK(std::fabs(apply_schedule(199, s) - 0.0001) < 1e-15);
  CHECK(std::fabs(apply_schedule(200, s) - 0.00001) < 1e-16);
  CHECK(apply_schedule(1299, LrSchedule::constant(0.001)) == 0.001);
  CHECK_THROWS_AS(apply_schedule(-1, s), ContractError);
  CHECK_THROWS_AS(apply_schedule(5, LrSchedule::step_decay(0.001, 0.1, 0)), ConfigError);
}
