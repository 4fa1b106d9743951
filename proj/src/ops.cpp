#include "ensnet/ops.hpp"

#include <algorithm>
#include <cstring>

#include "detail/math.hpp"
#include "ensnet/errors.hpp"

namespace ensnet::ops {
namespace {

enum class Broadcast { none, left_scalar, right_scalar };

Broadcast check_binary(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::none;
  const std::size_t na = numel(a);
  const std::size_t nb = numel(b);
  if (nb == 1) return Broadcast::right_scalar;
  if (na == 1) return Broadcast::left_scalar;
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

// Reduces an upstream gradient to the shape of a broadcast scalar operand.
template <typename T>
Tensor<T> reduce_to(const Tensor<T>& grad, const Shape& shape) {
  return Tensor<T>(shape, std::vector<T>{detail::sum(grad.ptr(), grad.size())});
}

template <typename T>
Tensor<T> broadcast_value(const Tensor<T>& t, const Shape& shape) {
  return Tensor<T>(shape, t[0]);
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const Broadcast mode = check_binary("add", a.shape(), b.shape());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Shape& out_shape = mode == Broadcast::left_scalar ? bv.shape() : av.shape();
  Tensor<T> out(out_shape);
  if (mode == Broadcast::none) {
    detail::add(av.ptr(), bv.ptr(), out.ptr(), out.size());
  } else {
    const Tensor<T> expanded = broadcast_value(mode == Broadcast::left_scalar ? av : bv, out_shape);
    const Tensor<T>& full = mode == Broadcast::left_scalar ? bv : av;
    detail::add(full.ptr(), expanded.ptr(), out.ptr(), out.size());
  }
  return a.tape().record(std::move(out), {a, b}, [mode](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (!ctx.needs_grad(slot)) continue;
      const bool reduced = (slot == 0 && mode == Broadcast::left_scalar) || (slot == 1 && mode == Broadcast::right_scalar);
      ctx.accumulate(slot, reduced ? reduce_to(g, ctx.input(slot).shape()) : g);
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  const Broadcast mode = check_binary("sub", a.shape(), b.shape());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Shape& out_shape = mode == Broadcast::left_scalar ? bv.shape() : av.shape();
  Tensor<T> out(out_shape);
  const Tensor<T> lhs = mode == Broadcast::left_scalar ? broadcast_value(av, out_shape) : av;
  const Tensor<T> rhs = mode == Broadcast::right_scalar ? broadcast_value(bv, out_shape) : bv;
  detail::sub(lhs.ptr(), rhs.ptr(), out.ptr(), out.size());
  return a.tape().record(std::move(out), {a, b}, [mode](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    if (ctx.needs_grad(0)) {
      ctx.accumulate(0, mode == Broadcast::left_scalar ? reduce_to(g, ctx.input(0).shape()) : g);
    }
    if (ctx.needs_grad(1)) {
      Tensor<T> neg(g.shape());
      detail::scale(T(-1), g.ptr(), neg.ptr(), g.size());
      ctx.accumulate(1, mode == Broadcast::right_scalar ? reduce_to(neg, ctx.input(1).shape()) : std::move(neg));
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  const Broadcast mode = check_binary("mul", a.shape(), b.shape());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Shape& out_shape = mode == Broadcast::left_scalar ? bv.shape() : av.shape();
  Tensor<T> out(out_shape);
  const Tensor<T> lhs = mode == Broadcast::left_scalar ? broadcast_value(av, out_shape) : av;
  const Tensor<T> rhs = mode == Broadcast::right_scalar ? broadcast_value(bv, out_shape) : bv;
  detail::mul(lhs.ptr(), rhs.ptr(), out.ptr(), out.size());
  return a.tape().record(std::move(out), {a, b}, [mode, out_shape](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (!ctx.needs_grad(slot)) continue;
      const Tensor<T>& other = ctx.input(1 - slot);
      const bool other_scalar = (slot == 0 && mode == Broadcast::right_scalar) || (slot == 1 && mode == Broadcast::left_scalar);
      const Tensor<T> other_full = other_scalar ? broadcast_value(other, out_shape) : other;
      Tensor<T> grad(out_shape);
      detail::mul(g.ptr(), other_full.ptr(), grad.ptr(), grad.size());
      const bool self_scalar = (slot == 0 && mode == Broadcast::left_scalar) || (slot == 1 && mode == Broadcast::right_scalar);
      ctx.accumulate(slot, self_scalar ? reduce_to(grad, ctx.input(slot).shape()) : std::move(grad));
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  detail::scale(factor, xv.ptr(), out.ptr(), out.size());
  return x.tape().record(std::move(out), {x}, [factor](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    Tensor<T> grad(g.shape());
    detail::scale(factor, g.ptr(), grad.ptr(), g.size());
    ctx.accumulate(0, std::move(grad));
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  detail::relu(xv.ptr(), out.ptr(), out.size());
  return x.tape().record(std::move(out), {x}, [](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    Tensor<T> grad(g.shape());
    detail::relu_backward(ctx.input(0).ptr(), g.ptr(), grad.ptr(), g.size());
    ctx.accumulate(0, std::move(grad));
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  return x.tape().record(Tensor<T>::scalar(detail::sum(xv.ptr(), xv.size())), {x}, [](BackwardContext<T>& ctx) {
    ctx.accumulate(0, Tensor<T>(ctx.input(0).shape(), ctx.grad_output()[0]));
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + to_string(av.shape()) + " by " + to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0);
  const std::size_t k = av.dim(1);
  const std::size_t n = bv.dim(1);
  Tensor<T> out({m, n});
  detail::gemm<T>(false, false, m, n, k, T(1), av.ptr(), k, bv.ptr(), n, T(0), out.ptr(), n);
  return a.tape().record(std::move(out), {a, b}, [m, k, n](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    if (ctx.needs_grad(0)) {
      // dA = dC * B^T
      Tensor<T> grad({m, k});
      detail::gemm<T>(false, true, m, k, n, T(1), g.ptr(), n, ctx.input(1).ptr(), n, T(0), grad.ptr(), k);
      ctx.accumulate(0, std::move(grad));
    }
    if (ctx.needs_grad(1)) {
      // dB = A^T * dC
      Tensor<T> grad({k, n});
      detail::gemm<T>(true, false, k, n, m, T(1), ctx.input(0).ptr(), k, g.ptr(), n, T(0), grad.ptr(), n);
      ctx.accumulate(1, std::move(grad));
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  const Tensor<T>& xv = x.value();
  if (numel(shape) != xv.size()) {
    throw DimensionError("reshape: " + to_string(xv.shape()) + " cannot become " + to_string(shape));
  }
  return x.tape().record(xv.reshaped(std::move(shape)), {x}, [](BackwardContext<T>& ctx) {
    ctx.accumulate(0, ctx.grad_output().reshaped(ctx.input(0).shape()));
  });
}

template <typename T>
Var<T> flatten(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.empty()) throw DimensionError("flatten: needs a batch axis");
  return reshape(x, Shape{s[0], numel(s) / s[0]});
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t end) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() < 2 || begin >= end || end > xv.dim(1)) {
    throw DimensionError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + to_string(xv.shape()));
  }
  const std::size_t batch = xv.dim(0);
  const std::size_t channels = xv.dim(1);
  const std::size_t inner = xv.size() / (batch * channels);
  Shape out_shape = xv.shape();
  out_shape[1] = end - begin;
  Tensor<T> out(out_shape);
  const std::size_t block = (end - begin) * inner;
  for (std::size_t n = 0; n < batch; ++n) {
    std::memcpy(out.ptr() + n * block, xv.ptr() + (n * channels + begin) * inner, block * sizeof(T));
  }
  return x.tape().record(std::move(out), {x}, [begin, batch, channels, inner, block](BackwardContext<T>& ctx) {
    Tensor<T> grad(ctx.input(0).shape());
    const Tensor<T>& g = ctx.grad_output();
    for (std::size_t n = 0; n < batch; ++n) {
      std::memcpy(grad.ptr() + (n * channels + begin) * inner, g.ptr() + n * block, block * sizeof(T));
    }
    ctx.accumulate(0, std::move(grad));
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Shape& first = parts.front().shape();
  if (first.size() < 2) throw DimensionError("concat_channels: inputs need a channel axis");
  std::size_t channels = 0;
  std::vector<std::size_t> offsets;
  for (const Var<T>& part : parts) {
    Shape s = part.shape();
    if (s.size() != first.size() || s[0] != first[0] ||
        !std::equal(s.begin() + 2, s.end(), first.begin() + 2)) {
      throw DimensionError("concat_channels: shape " + to_string(s) + " does not match " + to_string(first));
    }
    offsets.push_back(channels);
    channels += s[1];
  }
  const std::size_t batch = first[0];
  const std::size_t inner = numel(first) / (first[0] * first[1]);
  Shape out_shape = first;
  out_shape[1] = channels;
  Tensor<T> out(out_shape);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor<T>& pv = parts[p].value();
    const std::size_t block = pv.dim(1) * inner;
    for (std::size_t n = 0; n < batch; ++n) {
      std::memcpy(out.ptr() + (n * channels + offsets[p]) * inner, pv.ptr() + n * block, block * sizeof(T));
    }
  }
  return parts.front().tape().record(std::move(out), parts, [offsets, batch, channels, inner](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    for (std::size_t p = 0; p < offsets.size(); ++p) {
      if (!ctx.needs_grad(p)) continue;
      Tensor<T> grad(ctx.input(p).shape());
      const std::size_t block = grad.dim(1) * inner;
      for (std::size_t n = 0; n < batch; ++n) {
        std::memcpy(grad.ptr() + n * block, g.ptr() + (n * channels + offsets[p]) * inner, block * sizeof(T));
      }
      ctx.accumulate(p, std::move(grad));
    }
  });
}

#define ENSNET_INSTANTIATE_OPS(T)                                               \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                         \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                         \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                         \
  template Var<T> scale<T>(const Var<T>&, T);                                   \
  template Var<T> relu<T>(const Var<T>&);                                       \
  template Var<T> sum<T>(const Var<T>&);                                        \
  template Var<T> mean<T>(const Var<T>&);                                       \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                      \
  template Var<T> reshape<T>(const Var<T>&, Shape);                             \
  template Var<T> flatten<T>(const Var<T>&);                                    \
  template Var<T> slice_channels<T>(const Var<T>&, std::size_t, std::size_t);   \
  template Var<T> concat_channels<T>(const std::vector<Var<T>>&);

ENSNET_INSTANTIATE_OPS(float)
ENSNET_INSTANTIATE_OPS(double)

#undef ENSNET_INSTANTIATE_OPS

}  // namespace ensnet::ops
