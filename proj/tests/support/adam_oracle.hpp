#pragma once

#include <vector>

#include "ensnet/optimizer.hpp"

namespace ensnet::testing {

// Traces from tests/oracles/adam_reference.py (float64).
const std::vector<double> kScalarQuadratic = {
    1.4990000000033334, 1.4980000174451662, 1.4970000639231325, 1.496000150981452,  1.4950002900855306,
    1.4940004925972148, 1.4930007697508851, 1.4920011326305616, 1.4910015921481765, 1.4900021590231545,
};

const std::vector<std::vector<double>> kMatrix = {
    {0.009999999900000002, 0.99000000005, -0.49000000005, 1.0099999998, -1.9900000000079365, 0.740000000047619},
    {0.019994224132319063, 0.9800013380540017, -0.48000577576723913, 1.019997253703185, -1.9800012726783593, 0.7300026088596101},
    {0.0299786705943398, 0.97000491164251, -0.47002132925437073, 1.0299899001696498, -1.9700046714215083, 0.7200095932257248},
    {0.03994923223918623, 0.9600116201240236, -0.4600507675583096, 1.0399760596731416, -1.960011050933514, 0.7100227356697933},
    {0.04990170476084915, 0.9500223624378078, -0.45009829498510645, 1.0499538389555896, -1.95002126525258, 0.700043830403758},
    {0.05983179476787206, 0.9400380351312915, -0.44016820492626224, 1.059921335307995, -1.9400361658400822, 0.690074679264337},
    {0.06973512839950233, 0.9300595303775735, -0.43026487124257684, 1.069876640844663, -1.9300565997012604, 0.6801170876636977},
    {0.07960726033583523, 0.9200877340478038, -0.420392739254005, 1.079817846738408, -1.9200834075594748, 0.6701728605848163},
    {0.08944368315188017, 0.9101235238522805, -0.4105563163855902, 1.0897430473854894, -1.910117422097109, 0.6602437986510563},
    {0.09923983696465212, 0.9001677675629868, -0.4007601625203731, 1.099650344470596, -1.9001594662751227, 0.6503316942979308},
};

const std::vector<double> kMatrixDecayFinal = {0.09919508296086879, 0.9001761004059198,  -0.4007601625078127,
                                               1.09945326291909,    -1.9001595957293251, 0.6503366349721179};

const std::vector<double> kCoef = {1.0, 0.5, 2.0, 0.25, 3.0, 1.0};
const std::vector<double> kTarget = {0.5, -1.0, 0.0, 2.0, 0.1, -0.3};
const std::vector<double> kTheta0 = {0.0, 1.0, -0.5, 1.0, -2.0, 0.75};


// Adam on f(theta) = sum coef * (theta - target)^2 over a 2x3 matrix.
template <typename T>
std::vector<std::vector<double>> adam_matrix_trace(AdamHyper hyper, int steps) {
  Parameter<T> p{"w", Tensor<T>({2, 3}, std::vector<T>(kTheta0.begin(), kTheta0.end()))};
  std::vector<Parameter<T>*> params{&p};
  auto state = AdamState<T>::create("g", hyper, params);
  std::vector<std::vector<double>> trace;
  for (int t = 0; t < steps; ++t) {
    Tensor<T> g({2, 3});
    for (std::size_t i = 0; i < 6; ++i) g[i] = T(2 * kCoef[i]) * (p.value[i] - T(kTarget[i]));
    std::vector<const Tensor<T>*> grads{&g};
    adam_step<T>(params, grads, state);
    trace.emplace_back(p.value.data().begin(), p.value.data().end());
  }
  return trace;
}

}  // namespace ensnet::testing
