#pragma once

// Reference kernels, generic over the element type. The float instantiation
// backs the scalar dispatch table; the double instantiation is the compute
// path for float64 shadow tensors.

#include <cmath>
#include <cstddef>

namespace ensnet::kernels::scalar {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* c_row = c + i * ldc;
    if (beta == T(0)) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = T(0);
    } else if (beta != T(1)) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] *= beta;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T a_ip = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (a_ip == T(0)) continue;
      const T scaled = alpha * a_ip;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) c_row[j] += scaled * b[j * ldb + p];
      } else {
        const T* b_row = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) c_row[j] += scaled * b_row[j];
      }
    }
  }
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale(T s, const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * x[i];
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void relu(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* grad, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? grad[i] : T(0);
}

template <typename T>
T sum(const T* x, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// theta -= step * m_hat / (sqrt(v_hat) + eps), with m_hat = m * bias_fix1 and
// v_hat = v * bias_fix2. Weight decay is folded into the gradient.
template <typename T>
void adam_update(T* param, const T* grad, T* m, T* v, std::size_t n, T beta1, T beta2, T eps, T step_size,
                 T bias_fix1, T bias_fix2, T weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i] + weight_decay * param[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    const T m_hat = m[i] * bias_fix1;
    const T v_hat = v[i] * bias_fix2;
    param[i] -= step_size * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace ensnet::kernels::scalar
