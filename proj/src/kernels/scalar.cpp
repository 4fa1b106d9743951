#include "ensnet/kernels/kernels.hpp"
#include "ensnet/kernels/scalar.hpp"

namespace ensnet::kernels {
namespace {

void adam_update_f32(float* param, const float* grad, float* m, float* v, std::size_t n,
                     const AdamCoefficients& c) {
  scalar::adam_update<float>(param, grad, m, v, n, c.beta1, c.beta2, c.eps, c.step_size, c.bias_fix1,
                             c.bias_fix2, c.weight_decay);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",
      &scalar::gemm<float>,
      &scalar::add<float>,
      &scalar::sub<float>,
      &scalar::mul<float>,
      &scalar::scale<float>,
      &scalar::axpy<float>,
      &scalar::relu<float>,
      &scalar::relu_backward<float>,
      &scalar::sum<float>,
      &scalar::dot<float>,
      &adam_update_f32,
  };
  return table;
}

}  // namespace ensnet::kernels
