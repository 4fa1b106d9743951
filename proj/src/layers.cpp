#include "ensnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "detail/math.hpp"
#include "ensnet/errors.hpp"
#include "ensnet/ops.hpp"

namespace ensnet {

template <typename T>
Var<T> ParamBinder<T>::bind(const Parameter<T>& param) {
  auto it = bound_.find(&param);
  if (it != bound_.end()) return it->second;
  Var<T> var = tape_->watch(param.value, trainable_);
  bound_.emplace(&param, var);
  return var;
}

template <typename T>
const Var<T>* ParamBinder<T>::find(const Parameter<T>& param) const {
  auto it = bound_.find(&param);
  return it == bound_.end() ? nullptr : &it->second;
}

template class ParamBinder<float>;
template class ParamBinder<double>;

namespace layers {
namespace {

template <typename T>
void im2col(const T* x, std::size_t channels, std::size_t height, std::size_t width, std::size_t pad,
            std::size_t out_h, std::size_t out_w, T* cols) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* x_c = x + c * height * width;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* dst = cols + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
          T* dst_row = dst + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst_row, dst_row + out_w, T(0));
            continue;
          }
          const T* src_row = x_c + static_cast<std::size_t>(iy) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
            dst_row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) ? T(0) : src_row[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t channels, std::size_t height, std::size_t width, std::size_t pad,
                std::size_t out_h, std::size_t out_w, T* x) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    T* x_c = x + c * height * width;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* src = cols + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          T* dst_row = x_c + static_cast<std::size_t>(iy) * width;
          const T* src_row = src + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(width)) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

// Sum over rows of an [rows, cols] matrix, accumulated into out[cols].
template <typename T>
void column_sums(const T* m, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) detail::add_inplace(out, m + r * cols, cols);
}

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> out(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (T& v : out.data()) v = static_cast<T>(rng.normal(0.0, stddev));
  return out;
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, bool zero_pad) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  const Tensor<T>& bv = bias.value();
  if (xv.rank() != 4) throw DimensionError("conv2d: input must be [N,C,H,W], got " + to_string(xv.shape()));
  if (wv.rank() != 4 || wv.dim(2) != 3 || wv.dim(3) != 3) {
    throw DimensionError("conv2d: weight must be [O,C,3,3], got " + to_string(wv.shape()));
  }
  if (wv.dim(1) != xv.dim(1)) {
    throw DimensionError("conv2d: input " + to_string(xv.shape()) + " has " + std::to_string(xv.dim(1)) +
                         " channels, weight " + to_string(wv.shape()) + " expects " + std::to_string(wv.dim(1)));
  }
  if (bv.size() != wv.dim(0)) throw DimensionError("conv2d: bias " + to_string(bv.shape()) + " for " +
                                                   std::to_string(wv.dim(0)) + " output channels");
  const std::size_t pad = zero_pad ? 1 : 0;
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), height = xv.dim(2), width = xv.dim(3);
  if (!zero_pad && (height < 3 || width < 3)) {
    throw DimensionError("conv2d: unpadded input " + to_string(xv.shape()) + " is smaller than the 3x3 kernel");
  }
  const std::size_t out_c = wv.dim(0);
  const std::size_t out_h = height + 2 * pad - 2;
  const std::size_t out_w = width + 2 * pad - 2;
  const std::size_t plane = out_h * out_w;
  const std::size_t patch = channels * 9;

  Tensor<T> out({batch, out_c, out_h, out_w});
  std::vector<T> cols(patch * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(xv.ptr() + n * channels * height * width, channels, height, width, pad, out_h, out_w, cols.data());
    T* y = out.ptr() + n * out_c * plane;
    detail::gemm<T>(false, false, out_c, plane, patch, T(1), wv.ptr(), patch, cols.data(), plane, T(0), y, plane);
    for (std::size_t o = 0; o < out_c; ++o) {
      T* row = y + o * plane;
      const T b = bv[o];
      for (std::size_t i = 0; i < plane; ++i) row[i] += b;
    }
  }

  return x.tape().record(
      std::move(out), {x, weight, bias},
      [=](BackwardContext<T>& ctx) {
        const Tensor<T>& g = ctx.grad_output();
        const Tensor<T>& input = ctx.input(0);
        const Tensor<T>& w = ctx.input(1);
        const bool need_x = ctx.needs_grad(0);
        const bool need_w = ctx.needs_grad(1);
        std::vector<T> col_buf(patch * plane);
        std::vector<T> dcols(need_x ? patch * plane : 0);
        Tensor<T> dx = need_x ? Tensor<T>(input.shape()) : Tensor<T>();
        Tensor<T> dw = need_w ? Tensor<T>(w.shape()) : Tensor<T>();
        for (std::size_t n = 0; n < batch; ++n) {
          const T* gy = g.ptr() + n * out_c * plane;
          if (need_w) {
            im2col(input.ptr() + n * channels * height * width, channels, height, width, pad, out_h, out_w,
                   col_buf.data());
            detail::gemm<T>(false, true, out_c, patch, plane, T(1), gy, plane, col_buf.data(), plane, T(1),
                            dw.ptr(), patch);
          }
          if (need_x) {
            detail::gemm<T>(true, false, patch, plane, out_c, T(1), w.ptr(), patch, gy, plane, T(0), dcols.data(),
                            plane);
            col2im_add(dcols.data(), channels, height, width, pad, out_h, out_w,
                       dx.ptr() + n * channels * height * width);
          }
        }
        if (need_x) ctx.accumulate(0, std::move(dx));
        if (need_w) ctx.accumulate(1, std::move(dw));
        if (ctx.needs_grad(2)) {
          Tensor<T> db({out_c});
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t o = 0; o < out_c; ++o) db[o] += detail::sum(g.ptr() + (n * out_c + o) * plane, plane);
          }
          ctx.accumulate(2, std::move(db));
        }
      });
}

template <typename T>
Var<T> maxpool2x2_ceil(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw DimensionError("maxpool2x2_ceil: input must be [N,C,H,W], got " + to_string(xv.shape()));
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), height = xv.dim(2), width = xv.dim(3);
  const std::size_t out_h = (height + 1) / 2;
  const std::size_t out_w = (width + 1) / 2;
  Tensor<T> out({batch, channels, out_h, out_w});
  std::vector<std::uint32_t> argmax(out.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
        std::size_t best = base + (2 * oy) * width + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          const std::size_t iy = 2 * oy + dy;
          if (iy >= height) break;
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t ix = 2 * ox + dx;
            if (ix >= width) break;
            const std::size_t idx = base + iy * width + ix;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        out[o] = xv[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return x.tape().record(std::move(out), {x}, [argmax = std::move(argmax)](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    Tensor<T> dx(ctx.input(0).shape());
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += g[i];
    ctx.accumulate(0, std::move(dx));
  });
}

template <typename T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>* stats, Mode mode,
                 T eps, T momentum) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 4) {
    throw DimensionError("batchnorm: input must be [N,C] or [N,C,H,W], got " + to_string(xv.shape()));
  }
  const std::size_t batch = xv.dim(0);
  const std::size_t channels = xv.dim(1);
  const std::size_t inner = xv.size() / (batch * channels);
  const std::size_t count = batch * inner;
  if (gamma.value().size() != channels || beta.value().size() != channels) {
    throw DimensionError("batchnorm: gamma/beta sized for " + std::to_string(gamma.value().size()) +
                         " channels, input " + to_string(xv.shape()));
  }
  if (mode == Mode::train && batch < 2) {
    throw ContractError("batchnorm: train mode needs a batch of at least 2, got " + std::to_string(batch));
  }
  if (mode == Mode::eval && stats == nullptr) throw ContractError("batchnorm: eval mode needs running statistics");

  std::vector<T> mean(channels), inv_std(channels);
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < channels; ++c) {
      T acc = T(0);
      for (std::size_t n = 0; n < batch; ++n) acc += detail::sum(xv.ptr() + (n * channels + c) * inner, inner);
      mean[c] = acc / static_cast<T>(count);
      T sq = T(0);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = xv.ptr() + (n * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const T d = p[i] - mean[c];
          sq += d * d;
        }
      }
      const T var = sq / static_cast<T>(count);
      inv_std[c] = T(1) / std::sqrt(var + eps);
      if (stats != nullptr) {
        const T unbiased = count > 1 ? var * static_cast<T>(count) / static_cast<T>(count - 1) : var;
        stats->running_mean[c] = momentum * stats->running_mean[c] + (T(1) - momentum) * mean[c];
        stats->running_var[c] = momentum * stats->running_var[c] + (T(1) - momentum) * unbiased;
      }
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = stats->running_mean[c];
      inv_std[c] = T(1) / std::sqrt(stats->running_var[c] + eps);
    }
  }

  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> xhat(xv.shape());
  Tensor<T> out(xv.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T h = (xv[off + i] - mean[c]) * inv_std[c];
        xhat[off + i] = h;
        out[off + i] = gv[c] * h + bv[c];
      }
    }
  }

  const bool batch_stats = mode == Mode::train;
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](BackwardContext<T>& ctx) {
        const Tensor<T>& g = ctx.grad_output();
        const Tensor<T>& gam = ctx.input(1);
        std::vector<T> sum_g(channels, T(0)), sum_gx(channels, T(0));
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t off = (n * channels + c) * inner;
            sum_g[c] += detail::sum(g.ptr() + off, inner);
            sum_gx[c] += detail::dot(g.ptr() + off, xhat.ptr() + off, inner);
          }
        }
        if (ctx.needs_grad(0)) {
          Tensor<T> dx(g.shape());
          const T inv_count = T(1) / static_cast<T>(count);
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t off = (n * channels + c) * inner;
              const T k = gam[c] * inv_std[c];
              for (std::size_t i = 0; i < inner; ++i) {
                if (batch_stats) {
                  dx[off + i] = k * (g[off + i] - inv_count * sum_g[c] - xhat[off + i] * inv_count * sum_gx[c]);
                } else {
                  dx[off + i] = k * g[off + i];
                }
              }
            }
          }
          ctx.accumulate(0, std::move(dx));
        }
        if (ctx.needs_grad(1)) ctx.accumulate(1, Tensor<T>(gam.shape(), sum_gx));
        if (ctx.needs_grad(2)) ctx.accumulate(2, Tensor<T>(ctx.input(2).shape(), sum_g));
      });
}

template <typename T>
Var<T> dropout(const Var<T>& x, const Tensor<T>& mask, T ratio) {
  const Tensor<T>& xv = x.value();
  if (mask.size() != xv.size()) {
    throw ContractError("dropout: mask " + to_string(mask.shape()) + " does not match input " + to_string(xv.shape()));
  }
  if (!(ratio >= T(0) && ratio < T(1))) throw ContractError("dropout: ratio must lie in [0,1)");
  const T keep_scale = T(1) / (T(1) - ratio);
  Tensor<T> scaled_mask(xv.shape());
  detail::scale(keep_scale, mask.ptr(), scaled_mask.ptr(), mask.size());
  Tensor<T> out(xv.shape());
  detail::mul(xv.ptr(), scaled_mask.ptr(), out.ptr(), out.size());
  return x.tape().record(std::move(out), {x}, [scaled_mask = std::move(scaled_mask)](BackwardContext<T>& ctx) {
    const Tensor<T>& g = ctx.grad_output();
    Tensor<T> dx(g.shape());
    detail::mul(g.ptr(), scaled_mask.ptr(), dx.ptr(), g.size());
    ctx.accumulate(0, std::move(dx));
  });
}

namespace {

template <typename T>
void check_linear(const char* op, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || b.size() != w.dim(0)) {
    throw DimensionError(std::string(op) + ": input " + to_string(x.shape()) + ", weight " + to_string(w.shape()) +
                         ", bias " + to_string(b.shape()) + " are incompatible");
  }
}

// y = x * w^T + b given an already-effective weight matrix.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out_f = w.dim(0);
  Tensor<T> y({batch, out_f});
  for (std::size_t n = 0; n < batch; ++n) std::copy(b.ptr(), b.ptr() + out_f, y.ptr() + n * out_f);
  detail::gemm<T>(false, true, batch, out_f, in, T(1), x.ptr(), in, w.ptr(), in, T(1), y.ptr(), out_f);
  return y;
}

}  // namespace

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  check_linear("linear", x.value(), weight.value(), bias.value());
  const std::size_t batch = x.value().dim(0), in = x.value().dim(1), out_f = weight.value().dim(0);
  return x.tape().record(affine(x.value(), weight.value(), bias.value()), {x, weight, bias},
                         [=](BackwardContext<T>& ctx) {
                           const Tensor<T>& g = ctx.grad_output();
                           if (ctx.needs_grad(0)) {
                             Tensor<T> dx({batch, in});
                             detail::gemm<T>(false, false, batch, in, out_f, T(1), g.ptr(), out_f,
                                             ctx.input(1).ptr(), in, T(0), dx.ptr(), in);
                             ctx.accumulate(0, std::move(dx));
                           }
                           if (ctx.needs_grad(1)) {
                             Tensor<T> dw({out_f, in});
                             detail::gemm<T>(true, false, out_f, in, batch, T(1), g.ptr(), out_f,
                                             ctx.input(0).ptr(), in, T(0), dw.ptr(), in);
                             ctx.accumulate(1, std::move(dw));
                           }
                           if (ctx.needs_grad(2)) {
                             Tensor<T> db({out_f});
                             column_sums(g.ptr(), batch, out_f, db.ptr());
                             ctx.accumulate(2, std::move(db));
                           }
                         });
}

template <typename T>
Var<T> dropconnect_linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const Tensor<T>& mask,
                          T ratio) {
  check_linear("dropconnect_linear", x.value(), weight.value(), bias.value());
  if (mask.shape() != weight.value().shape()) {
    throw ContractError("dropconnect_linear: mask " + to_string(mask.shape()) + " does not match weight " +
                        to_string(weight.value().shape()));
  }
  if (!(ratio >= T(0) && ratio < T(1))) throw ContractError("dropconnect_linear: ratio must lie in [0,1)");
  const std::size_t batch = x.value().dim(0), in = x.value().dim(1), out_f = weight.value().dim(0);
  Tensor<T> scaled_mask(mask.shape());
  detail::scale(T(1) / (T(1) - ratio), mask.ptr(), scaled_mask.ptr(), mask.size());
  Tensor<T> effective(mask.shape());
  detail::mul(weight.value().ptr(), scaled_mask.ptr(), effective.ptr(), effective.size());
  Tensor<T> y = affine(x.value(), effective, bias.value());
  return x.tape().record(
      std::move(y), {x, weight, bias},
      [=, scaled_mask = std::move(scaled_mask), effective = std::move(effective)](BackwardContext<T>& ctx) {
        const Tensor<T>& g = ctx.grad_output();
        if (ctx.needs_grad(0)) {
          Tensor<T> dx({batch, in});
          detail::gemm<T>(false, false, batch, in, out_f, T(1), g.ptr(), out_f, effective.ptr(), in, T(0), dx.ptr(),
                          in);
          ctx.accumulate(0, std::move(dx));
        }
        if (ctx.needs_grad(1)) {
          Tensor<T> dw({out_f, in});
          detail::gemm<T>(true, false, out_f, in, batch, T(1), g.ptr(), out_f, ctx.input(0).ptr(), in, T(0),
                          dw.ptr(), in);
          detail::mul(dw.ptr(), scaled_mask.ptr(), dw.ptr(), dw.size());
          ctx.accumulate(1, std::move(dw));
        }
        if (ctx.needs_grad(2)) {
          Tensor<T> db({out_f});
          column_sums(g.ptr(), batch, out_f, db.ptr());
          ctx.accumulate(2, std::move(db));
        }
      });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax: logits must be [N,K], got " + to_string(logits.shape()));
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.ptr() + r * classes;
    T* p = out.ptr() + r * classes;
    const T peak = *std::max_element(in, in + classes);
    T total = T(0);
    for (std::size_t k = 0; k < classes; ++k) {
      p[k] = std::exp(in[k] - peak);
      total += p[k];
    }
    for (std::size_t k = 0; k < classes; ++k) p[k] /= total;
  }
  return out;
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels) {
  const Tensor<T>& lv = logits.value();
  if (lv.rank() != 2) throw DimensionError("softmax_cross_entropy: logits must be [N,K], got " + to_string(lv.shape()));
  const std::size_t rows = lv.dim(0), classes = lv.dim(1);
  if (labels.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0," +
                      std::to_string(classes) + ")");
    }
  }
  T loss = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = lv.ptr() + r * classes;
    const T peak = *std::max_element(in, in + classes);
    T total = T(0);
    for (std::size_t k = 0; k < classes; ++k) total += std::exp(in[k] - peak);
    loss += std::log(total) + peak - in[labels[r]];
  }
  loss /= static_cast<T>(rows);
  std::vector<int> saved(labels.begin(), labels.end());
  return logits.tape().record(Tensor<T>::scalar(loss), {logits},
                              [rows, classes, saved = std::move(saved)](BackwardContext<T>& ctx) {
                                Tensor<T> grad = softmax(ctx.input(0));
                                for (std::size_t r = 0; r < rows; ++r) grad[r * classes + saved[r]] -= T(1);
                                const T factor = ctx.grad_output()[0] / static_cast<T>(rows);
                                detail::scale(factor, grad.ptr(), grad.ptr(), grad.size());
                                ctx.accumulate(0, std::move(grad));
                              });
}

template <typename T>
Tensor<T> sample_keep_mask(const Shape& shape, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ContractError("drop ratio must lie in [0,1)");
  Tensor<T> mask(shape, T(1));
  if (ratio == 0.0) return mask;
  for (T& m : mask.data()) m = rng.bernoulli(1.0 - ratio) ? T(1) : T(0);
  return mask;
}

template <typename T>
Conv2dLayer<T> Conv2dLayer<T>::create(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                                      bool zero_pad, Rng& rng) {
  Conv2dLayer layer;
  layer.weight = {name + ".weight", he_normal<T>({out_channels, in_channels, 3, 3}, in_channels * 9, rng)};
  layer.bias = {name + ".bias", Tensor<T>({out_channels})};
  layer.zero_pad = zero_pad;
  return layer;
}

template <typename T>
Var<T> Conv2dLayer<T>::forward(ParamBinder<T>& binder, const Var<T>& x) const {
  return conv2d(x, binder.bind(weight), binder.bind(bias), zero_pad);
}

template <typename T>
BatchNormLayer<T> BatchNormLayer<T>::create(const std::string& name, std::size_t channels) {
  BatchNormLayer layer;
  layer.gamma = {name + ".gamma", Tensor<T>({channels}, T(1))};
  layer.beta = {name + ".beta", Tensor<T>({channels})};
  layer.stats.running_mean = Tensor<T>({channels});
  layer.stats.running_var = Tensor<T>({channels}, T(1));
  return layer;
}

template <typename T>
Var<T> BatchNormLayer<T>::forward(ParamBinder<T>& binder, const Var<T>& x, Mode mode, bool update_stats) {
  BatchNormStats<T>* target = &stats;
  BatchNormStats<T> scratch;
  if (mode == Mode::train && !update_stats) {
    scratch = stats;
    target = &scratch;
  }
  return batchnorm(x, binder.bind(gamma), binder.bind(beta), target, mode, eps, momentum);
}

template <typename T>
FCLayer<T> FCLayer<T>::create(const std::string& name, std::size_t in_features, std::size_t out_features, Rng& rng) {
  FCLayer layer;
  layer.weight = {name + ".weight", he_normal<T>({out_features, in_features}, in_features, rng)};
  layer.bias = {name + ".bias", Tensor<T>({out_features})};
  return layer;
}

template <typename T>
Var<T> FCLayer<T>::forward(ParamBinder<T>& binder, const Var<T>& x) const {
  const Var<T> flat = x.value().rank() == 2 ? x : ops::flatten(x);
  return linear(flat, binder.bind(weight), binder.bind(bias));
}

template <typename T>
Var<T> dropconnect_fc(ParamBinder<T>& binder, const Var<T>& x, const FCLayer<T>& layer, const DropMask<T>* mask) {
  if (mask == nullptr) return layer.forward(binder, x);
  if (mask->kind != DropKind::dropconnect) throw ContractError("dropconnect_fc: mask is not a dropconnect mask");
  const Var<T> flat = x.value().rank() == 2 ? x : ops::flatten(x);
  return dropconnect_linear(flat, binder.bind(layer.weight), binder.bind(layer.bias), mask->mask,
                            static_cast<T>(mask->ratio));
}

#define ENSNET_INSTANTIATE_LAYERS(T)                                                                         \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, bool);                              \
  template Var<T> maxpool2x2_ceil<T>(const Var<T>&);                                                        \
  template Var<T> batchnorm<T>(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormStats<T>*, Mode, T, T); \
  template Var<T> dropout<T>(const Var<T>&, const Tensor<T>&, T);                                           \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                    \
  template Var<T> dropconnect_linear<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Tensor<T>&, T);   \
  template Var<T> softmax_cross_entropy<T>(const Var<T>&, std::span<const int>);                            \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                          \
  template Tensor<T> sample_keep_mask<T>(const Shape&, double, Rng&);                                        \
  template struct Conv2dLayer<T>;                                                                           \
  template struct BatchNormLayer<T>;                                                                        \
  template struct FCLayer<T>;                                                                               \
  template Var<T> dropconnect_fc<T>(ParamBinder<T>&, const Var<T>&, const FCLayer<T>&, const DropMask<T>*);

ENSNET_INSTANTIATE_LAYERS(float)
ENSNET_INSTANTIATE_LAYERS(double)

#undef ENSNET_INSTANTIATE_LAYERS

}  // namespace layers
}  // namespace ensnet
