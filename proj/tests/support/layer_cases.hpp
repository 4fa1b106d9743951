#pragma once

// Random small instances of every differentiable layer, shared by the unit
// tests and the acceptance suite.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ensnet/layers.hpp"
#include "gradcheck.hpp"

namespace ensnet::testing {

struct LayerInstance {
  Builder f;
  std::vector<TensorD> inputs;
};

struct LayerCase {
  std::string name;
  std::function<LayerInstance(Rng&)> make;
};

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.engine()() % (hi - lo + 1));
}

inline LayerCase conv_case(bool pad) {
  return {pad ? "conv2d (zero padding)" : "conv2d (no padding)", [pad](Rng& rng) {
            const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), o = pick(rng, 1, 3);
            const std::size_t h = pick(rng, 3, 6), w = pick(rng, 3, 6);
            LayerInstance inst;
            inst.inputs = {random_tensor({n, c, h, w}, rng), random_tensor({o, c, 3, 3}, rng),
                           random_tensor({o}, rng)};
            inst.f = [pad](Tape<double>&, const std::vector<Var<double>>& v) {
              return layers::conv2d(v[0], v[1], v[2], pad);
            };
            return inst;
          }};
}

inline LayerCase maxpool_case() {
  return {"maxpool 2x2 ceil", [](Rng& rng) {
            const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3);
            const std::size_t h = pick(rng, 2, 7), w = pick(rng, 2, 7);
            LayerInstance inst;
            inst.inputs = {distinct_tensor({n, c, h, w}, rng)};
            inst.f = [](Tape<double>&, const std::vector<Var<double>>& v) { return layers::maxpool2x2_ceil(v[0]); };
            return inst;
          }};
}

inline LayerCase batchnorm_case(bool spatial) {
  return {spatial ? "batchnorm [N,C,H,W] train" : "batchnorm [N,C] train", [spatial](Rng& rng) {
            const std::size_t c = pick(rng, 1, 3);
            const Shape shape = spatial ? Shape{pick(rng, 2, 3), c, pick(rng, 2, 3), pick(rng, 2, 3)}
                                        : Shape{pick(rng, 3, 6), c};
            LayerInstance inst;
            inst.inputs = {random_tensor(shape, rng, -2.0, 2.0), random_tensor({c}, rng, 0.5, 1.5),
                           random_tensor({c}, rng)};
            inst.f = [](Tape<double>&, const std::vector<Var<double>>& v) {
              return layers::batchnorm<double>(v[0], v[1], v[2], nullptr, Mode::train);
            };
            return inst;
          }};
}

inline LayerCase linear_case() {
  return {"fully connected", [](Rng& rng) {
            const std::size_t n = pick(rng, 1, 4), in = pick(rng, 1, 6), out = pick(rng, 1, 5);
            LayerInstance inst;
            inst.inputs = {random_tensor({n, in}, rng), random_tensor({out, in}, rng), random_tensor({out}, rng)};
            inst.f = [](Tape<double>&, const std::vector<Var<double>>& v) { return layers::linear(v[0], v[1], v[2]); };
            return inst;
          }};
}

inline LayerCase dropconnect_case() {
  return {"dropconnect FC (fixed mask)", [](Rng& rng) {
            const std::size_t n = pick(rng, 1, 4), in = pick(rng, 1, 6), out = pick(rng, 1, 5);
            const double ratio = rng.uniform(0.1, 0.6);
            auto mask = std::make_shared<TensorD>(layers::sample_keep_mask<double>({out, in}, ratio, rng));
            LayerInstance inst;
            inst.inputs = {random_tensor({n, in}, rng), random_tensor({out, in}, rng), random_tensor({out}, rng)};
            inst.f = [mask, ratio](Tape<double>&, const std::vector<Var<double>>& v) {
              return layers::dropconnect_linear(v[0], v[1], v[2], *mask, ratio);
            };
            return inst;
          }};
}

inline LayerCase cross_entropy_case() {
  return {"softmax cross-entropy", [](Rng& rng) {
            const std::size_t n = pick(rng, 1, 5), k = pick(rng, 2, 10);
            auto labels = std::make_shared<std::vector<int>>();
            for (std::size_t i = 0; i < n; ++i) labels->push_back(static_cast<int>(pick(rng, 0, k - 1)));
            LayerInstance inst;
            inst.inputs = {random_tensor({n, k}, rng, -3.0, 3.0)};
            inst.f = [labels](Tape<double>&, const std::vector<Var<double>>& v) {
              return layers::softmax_cross_entropy<double>(v[0], *labels);
            };
            return inst;
          }};
}

inline std::vector<LayerCase> all_layer_cases() {
  return {conv_case(true),         conv_case(false),   maxpool_case(),     batchnorm_case(false),
          batchnorm_case(true),    linear_case(),      dropconnect_case(), cross_entropy_case()};
}

}  // namespace ensnet::testing
