#pragma once

// Element-type dispatch: float goes through the active kernel table, double
// through the scalar reference kernels.

#include <cstddef>
#include <type_traits>

#include "ensnet/kernels/kernels.hpp"
#include "ensnet/kernels/scalar.hpp"

namespace ensnet::detail {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().gemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    kernels::scalar::gemm<T>(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().add(a, b, out, n);
  } else {
    kernels::scalar::add<T>(a, b, out, n);
  }
}

template <typename T>
void add_inplace(T* y, const T* x, std::size_t n) {
  add<T>(y, x, y, n);
}

template <typename T>
void sub(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().sub(a, b, out, n);
  } else {
    kernels::scalar::sub<T>(a, b, out, n);
  }
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().mul(a, b, out, n);
  } else {
    kernels::scalar::mul<T>(a, b, out, n);
  }
}

template <typename T>
void scale(T s, const T* x, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().scale(s, x, out, n);
  } else {
    kernels::scalar::scale<T>(s, x, out, n);
  }
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().axpy(alpha, x, y, n);
  } else {
    kernels::scalar::axpy<T>(alpha, x, y, n);
  }
}

template <typename T>
void relu(const T* x, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().relu(x, out, n);
  } else {
    kernels::scalar::relu<T>(x, out, n);
  }
}

template <typename T>
void relu_backward(const T* x, const T* grad, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().relu_backward(x, grad, out, n);
  } else {
    kernels::scalar::relu_backward<T>(x, grad, out, n);
  }
}

template <typename T>
T sum(const T* x, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return kernels::active().sum(x, n);
  } else {
    return kernels::scalar::sum<T>(x, n);
  }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return kernels::active().dot(a, b, n);
  } else {
    return kernels::scalar::dot<T>(a, b, n);
  }
}

}  // namespace ensnet::detail
