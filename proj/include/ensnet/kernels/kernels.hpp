#pragma once

// Float32 compute kernels behind a runtime-selected dispatch table.
//
// Every entry has a portable scalar reference implementation (scalar.hpp).
// When the host CPU supports AVX2+FMA, the vectorized variants from
// avx2.cpp are selected instead. Both tables are always reachable so the
// equivalence tests can compare them directly.

#include <cstddef>
#include <string_view>

namespace ensnet::kernels {

struct AdamCoefficients {
  float beta1;
  float beta2;
  float eps;
  float step_size;     // alpha
  float bias_fix1;     // 1 / (1 - beta1^t)
  float bias_fix2;     // 1 / (1 - beta2^t)
  float weight_decay;
};

struct KernelTable {
  std::string_view name;

  // Row-major C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C.
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
               const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
               std::size_t ldc);

  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  void (*sub)(const float* a, const float* b, float* out, std::size_t n);
  void (*mul)(const float* a, const float* b, float* out, std::size_t n);
  void (*scale)(float s, const float* x, float* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  void (*relu)(const float* x, float* out, std::size_t n);
  // out = grad where x > 0, else 0
  void (*relu_backward)(const float* x, const float* grad, float* out, std::size_t n);
  float (*sum)(const float* x, std::size_t n);
  float (*dot)(const float* a, const float* b, std::size_t n);

  void (*adam_update)(float* param, const float* grad, float* m, float* v, std::size_t n,
                      const AdamCoefficients& c);
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

// The table used by the library. Chosen once on first use: AVX2 when
// available unless the environment variable ENSNET_KERNELS=scalar is set.
const KernelTable& active();

// Overrides the active table (tests and benchmarks). Returns the previous one.
const KernelTable& set_active(const KernelTable& table);

}  // namespace ensnet::kernels
