#pragma once

// Differentiable tensor operations. Every op reads its inputs from the tape
// and appends a new node; inputs are never modified.

#include <cstddef>

#include "ensnet/tape.hpp"

namespace ensnet::ops {

// Elementwise with equal shapes, or with either side holding a single element.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& x, T factor);

// Gradient at exactly zero is zero.
template <typename T>
Var<T> relu(const Var<T>& x);

// Sum of all elements, as a rank-0 tensor.
template <typename T>
Var<T> sum(const Var<T>& x);

// Mean of all elements, as a rank-0 tensor.
template <typename T>
Var<T> mean(const Var<T>& x);

// [M,K] x [K,N] -> [M,N]
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// [N, ...] -> [N, prod(...)]
template <typename T>
Var<T> flatten(const Var<T>& x);

// Channels [begin, end) of an [N,C,...] tensor.
template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t end);

// Concatenation along axis 1; inverse of a sequence of slice_channels.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

}  // namespace ensnet::ops
