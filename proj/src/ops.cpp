#include "hpgn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace hpgn::ops {

namespace {

template <typename T>
using Impl = detail::TensorImpl<T>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + " tensor, got " + s.str());
  }
}

template <typename T>
Tensor<T> make_like(const Shape& shape) {
  return Tensor<T>::zeros(shape);
}

// Pads shapes to rank 4 and returns per-axis strides of `b` with 0 on
// broadcast axes.
struct BroadcastPlan {
  std::array<std::size_t, 4> extent{1, 1, 1, 1};
  std::array<std::size_t, 4> b_stride{0, 0, 0, 0};
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  if (a.rank() != b.rank() || a.rank() > 4) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + b.str() + " over " + a.str());
  }
  BroadcastPlan plan;
  const std::size_t offset = 4 - a.rank();
  std::array<std::size_t, 4> bdims{1, 1, 1, 1};
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (b[i] != a[i] && b[i] != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + b.str() + " over " + a.str());
    }
    plan.extent[offset + i] = a[i];
    bdims[offset + i] = b[i];
  }
  std::size_t stride = 1;
  for (int i = 3; i >= 0; --i) {
    plan.b_stride[i] = bdims[i] == 1 ? 0 : stride;
    stride *= bdims[i];
  }
  return plan;
}

// Calls f(index_in_a, index_in_b) for every element of a in row-major order.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  std::size_t ia = 0;
  for (std::size_t i0 = 0; i0 < p.extent[0]; ++i0) {
    for (std::size_t i1 = 0; i1 < p.extent[1]; ++i1) {
      for (std::size_t i2 = 0; i2 < p.extent[2]; ++i2) {
        std::size_t ib = i0 * p.b_stride[0] + i1 * p.b_stride[1] + i2 * p.b_stride[2];
        const std::size_t s3 = p.b_stride[3];
        for (std::size_t i3 = 0; i3 < p.extent[3]; ++i3, ++ia, ib += s3) f(ia, ib);
      }
    }
  }
}

// Reductions with a fixed 8-lane accumulation order, independent of pointer
// alignment, so results are bit-reproducible across allocations.
template <typename T>
T fold_lanes(const std::array<T, 8>& acc, T tail) {
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

template <typename T>
T row_sum(const T* p, std::size_t n) {
  std::array<T, 8> acc{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += p[i + j];
  }
  T tail = 0;
  for (; i < n; ++i) tail += p[i];
  return fold_lanes(acc, tail);
}

template <typename T>
T row_dot(const T* a, const T* b, std::size_t n) {
  std::array<T, 8> acc{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return fold_lanes(acc, tail);
}

enum class BinaryKind { add, sub, mul };

template <typename T, BinaryKind kKind>
T combine(T a, T b) {
  if constexpr (kKind == BinaryKind::add) return a + b;
  else if constexpr (kKind == BinaryKind::sub) return a - b;
  else return a * b;
}

template <typename T, BinaryKind kKind>
void binary_forward(const T* pa, const T* pb, T* o, std::size_t n, bool same, const BroadcastPlan& plan) {
  if (same) {
    for (std::size_t i = 0; i < n; ++i) o[i] = combine<T, kKind>(pa[i], pb[i]);
  } else {
    for_each_broadcast(plan, [&](std::size_t ia, std::size_t ib) { o[ia] = combine<T, kKind>(pa[ia], pb[ib]); });
  }
}

// d/da and d/db of the kind, as multipliers of the incoming gradient.
template <typename T, BinaryKind kKind>
void binary_backward(const T* g, const T* va, const T* vb, T* ga, T* gb, std::size_t n, bool same,
                     const BroadcastPlan& plan) {
  if (ga) {
    if (same) {
      for (std::size_t i = 0; i < n; ++i) ga[i] += kKind == BinaryKind::mul ? g[i] * vb[i] : g[i];
    } else {
      for_each_broadcast(plan, [&](std::size_t ia, std::size_t ib) {
        ga[ia] += kKind == BinaryKind::mul ? g[ia] * vb[ib] : g[ia];
      });
    }
  }
  if (gb) {
    if (same) {
      for (std::size_t i = 0; i < n; ++i) {
        if constexpr (kKind == BinaryKind::add) gb[i] += g[i];
        else if constexpr (kKind == BinaryKind::sub) gb[i] -= g[i];
        else gb[i] += g[i] * va[i];
      }
      return;
    }
    // Walk rows of the last axis; a broadcast last axis becomes a row reduction.
    std::size_t ia = 0;
    const std::size_t len = plan.extent[3], s3 = plan.b_stride[3];
    for (std::size_t i0 = 0; i0 < plan.extent[0]; ++i0) {
      for (std::size_t i1 = 0; i1 < plan.extent[1]; ++i1) {
        for (std::size_t i2 = 0; i2 < plan.extent[2]; ++i2, ia += len) {
          const std::size_t ib = i0 * plan.b_stride[0] + i1 * plan.b_stride[1] + i2 * plan.b_stride[2];
          if (s3 == 0) {
            const T r = kKind == BinaryKind::mul ? row_dot(g + ia, va + ia, len) : row_sum(g + ia, len);
            gb[ib] += kKind == BinaryKind::sub ? -r : r;
          } else {
            for (std::size_t i3 = 0; i3 < len; ++i3) {
              if constexpr (kKind == BinaryKind::add) gb[ib + i3 * s3] += g[ia + i3];
              else if constexpr (kKind == BinaryKind::sub) gb[ib + i3 * s3] -= g[ia + i3];
              else gb[ib + i3 * s3] += g[ia + i3] * va[ia + i3];
            }
          }
        }
      }
    }
  }
}

template <typename T, BinaryKind kKind>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name) {
  const bool same = a.shape() == b.shape();
  BroadcastPlan plan;
  if (!same) plan = plan_broadcast(a.shape(), b.shape(), name);
  auto out = make_like<T>(a.shape());
  binary_forward<T, kKind>(a.impl()->data.data(), b.impl()->data.data(), out.impl()->data.data(), a.numel(), same,
                           plan);
  auto ai = a.impl();
  auto bi = b.impl();
  record_op<T>(out, {&a, &b}, [ai, bi, same, plan](const Impl<T>& o) {
    T* ga = ai->requires_grad ? detail::grad_buffer(*ai).data() : nullptr;
    T* gb = bi->requires_grad ? detail::grad_buffer(*bi).data() : nullptr;
    binary_backward<T, kKind>(o.grad.data(), ai->data.data(), bi->data.data(), ga, gb, o.data.size(), same, plan);
  });
  return out;
}

// Unary op with derivative expressed through input x and output y.
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  auto out = make_like<T>(x.shape());
  const auto& xd = x.impl()->data;
  auto& od = out.impl()->data;
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = fwd(xd[i]);
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, deriv](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * deriv(xi->data[i], o.data[i]);
  });
  return out;
}

template <typename T>
void probe_branches(const std::vector<T>& x, auto branch_of) {
  if (!diag::probing()) return;
  for (const T v : x) diag::fold_branch(branch_of(v));
}

// Per-axis interpolation taps for half-pixel bilinear 2x upsampling.
struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> w1;
};

Taps upsample_taps(std::size_t in) {
  Taps t;
  const std::size_t out = in * 2;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w1.resize(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t.i0[o] = std::min(lo, in - 1);
    t.i1[o] = std::min(lo + 1, in - 1);
    t.w1[o] = src - static_cast<double>(lo);
  }
  return t;
}

std::size_t reflect_index(long i, long n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.rank()) throw DimensionError(std::string(op) + ": axis out of range for " + s.str());
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.axis = s[axis];
  for (std::size_t i = axis + 1; i < s.rank(); ++i) r.inner *= s[i];
  return r;
}

// Output columns [lo, hi) read in-bounds input for kernel offset `k`.
struct ValidRange {
  std::size_t lo, hi;
};

ValidRange valid_outputs(std::size_t kpos, std::size_t stride, std::size_t pad, std::size_t in, std::size_t out) {
  // ix = o * stride + kpos - pad must satisfy 0 <= ix < in.
  std::size_t lo = 0;
  if (kpos < pad) lo = (pad - kpos + stride - 1) / stride;
  std::size_t hi = 0;
  if (in + pad > kpos) hi = std::min(out, (in + pad - kpos - 1) / stride + 1);
  return {std::min(lo, hi), hi};
}

// Gathers the receptive fields of one sample/group into a (cin*kh*kw) x (ho*wo) matrix.
template <typename T>
void im2col(const T* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, T* cols) {
  for (std::size_t c = 0; c < cin; ++c) {
    const T* xc = x + c * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      const auto ry = valid_outputs(ky, stride, pad, h, ho);
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const auto rx = valid_outputs(kx, stride, pad, w, wo);
        T* row = cols + ((c * kh + ky) * kw + kx) * ho * wo;
        std::fill(row, row + ry.lo * wo, T(0));
        std::fill(row + ry.hi * wo, row + ho * wo, T(0));
        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
          const T* src = xc + (oy * stride + ky - pad) * w + kx - pad;
          T* dst = row + oy * wo;
          std::fill(dst, dst + rx.lo, T(0));
          std::fill(dst + rx.hi, dst + wo, T(0));
          if (stride == 1) {
            std::copy(src + rx.lo, src + rx.hi, dst + rx.lo);
          } else {
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox] = src[ox * stride];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, T* x) {
  for (std::size_t c = 0; c < cin; ++c) {
    T* xc = x + c * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      const auto ry = valid_outputs(ky, stride, pad, h, ho);
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const auto rx = valid_outputs(kx, stride, pad, w, wo);
        const T* row = cols + ((c * kh + ky) * kw + kx) * ho * wo;
        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
          T* dst = xc + (oy * stride + ky - pad) * w + kx - pad;
          const T* src = row + oy * wo;
          if (stride == 1) {
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox] += src[ox];
          } else {
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox * stride] += src[ox];
          }
        }
      }
    }
  }
}

// Direct kernels for one input channel per group and one output channel per group.
template <typename T>
void depthwise_forward(const T* x, const T* wt, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, T* out) {
  for (std::size_t ky = 0; ky < kh; ++ky) {
    const auto ry = valid_outputs(ky, stride, pad, h, ho);
    for (std::size_t kx = 0; kx < kw; ++kx) {
      const auto rx = valid_outputs(kx, stride, pad, w, wo);
      const T wv = wt[ky * kw + kx];
      for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
        const T* src = x + (oy * stride + ky - pad) * w + kx - pad;
        T* dst = out + oy * wo;
        for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox] += wv * src[ox * stride];
      }
    }
  }
}

template <typename T>
void depthwise_backward(const T* x, const T* wt, const T* g, std::size_t h, std::size_t w, std::size_t kh,
                        std::size_t kw, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, T* gx,
                        T* gw) {
  for (std::size_t ky = 0; ky < kh; ++ky) {
    const auto ry = valid_outputs(ky, stride, pad, h, ho);
    for (std::size_t kx = 0; kx < kw; ++kx) {
      const auto rx = valid_outputs(kx, stride, pad, w, wo);
      const T wv = wt[ky * kw + kx];
      T acc = 0;
      for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
        const std::size_t base = (oy * stride + ky - pad) * w + kx - pad;
        const T* gr = g + oy * wo;
        if (gw) {
          const T* src = x + base;
          for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) acc += gr[ox] * src[ox * stride];
        }
        if (gx) {
          T* dst = gx + base;
          for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox * stride] += wv * gr[ox];
        }
      }
      if (gw) gw[ky * kw + kx] += acc;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dOptions opt) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const std::size_t groups = opt.groups;
  if (groups == 0 || opt.stride == 0) throw DimensionError("conv2d: stride and groups must be positive");
  if (cin % groups != 0 || cout % groups != 0 || weight.dim(1) * groups != cin) {
    throw DimensionError("conv2d: input " + input.shape().str() + " incompatible with weight " +
                         weight.shape().str() + " (groups=" + std::to_string(groups) + ")");
  }
  if (kh > h + 2 * opt.padding || kw > w + 2 * opt.padding) {
    throw DimensionError("conv2d: kernel " + weight.shape().str() + " larger than padded input " +
                         input.shape().str());
  }
  if (bias.defined() && (bias.shape().rank() != 1 || bias.dim(0) != cout)) {
    throw DimensionError("conv2d: bias " + bias.shape().str() + " does not match weight " + weight.shape().str());
  }
  const std::size_t ho = (h + 2 * opt.padding - kh) / opt.stride + 1;
  const std::size_t wo = (w + 2 * opt.padding - kw) / opt.stride + 1;
  const std::size_t cin_g = cin / groups, cout_g = cout / groups;
  const std::size_t k = cin_g * kh * kw, p = ho * wo;
  const bool pointwise = kh == 1 && kw == 1 && opt.stride == 1 && opt.padding == 0;
  const bool depthwise = cin_g == 1 && cout_g == 1 && !pointwise;

  auto out = make_like<T>(Shape{n, cout, ho, wo});
  std::vector<T> cols(pointwise || depthwise ? 0 : k * p);
  const T* xd = input.impl()->data.data();
  const T* wd = weight.impl()->data.data();
  T* od = out.impl()->data.data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t g = 0; g < groups; ++g) {
      const T* xg = xd + (s * cin + g * cin_g) * h * w;
      if (depthwise) {
        depthwise_forward(xg, wd + g * k, h, w, kh, kw, opt.stride, opt.padding, ho, wo, od + (s * cout + g) * p);
        continue;
      }
      const T* colp = xg;
      if (!pointwise) {
        im2col(xg, cin_g, h, w, kh, kw, opt.stride, opt.padding, ho, wo, cols.data());
        colp = cols.data();
      }
      Eigen::Map<const RowMat<T>> wm(wd + g * cout_g * k, cout_g, k);
      Eigen::Map<const RowMat<T>> cm(colp, k, p);
      Eigen::Map<RowMat<T>> om(od + (s * cout + g * cout_g) * p, cout_g, p);
      om.noalias() = wm * cm;
    }
    if (bias.defined()) {
      const T* bd = bias.impl()->data.data();
      for (std::size_t c = 0; c < cout; ++c) {
        T* oc = od + (s * cout + c) * p;
        for (std::size_t i = 0; i < p; ++i) oc[i] += bd[c];
      }
    }
  }

  auto xi = input.impl();
  auto wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  record_op<T>(out, {&input, &weight, &bias},
               [=](const Impl<T>& o) {
                 const bool need_x = xi->requires_grad, need_w = wi->requires_grad;
                 T* gx = need_x ? detail::grad_buffer(*xi).data() : nullptr;
                 T* gw = need_w ? detail::grad_buffer(*wi).data() : nullptr;
                 std::vector<T> buf(pointwise || depthwise ? 0 : k * p);
                 std::vector<T> dcols(pointwise || depthwise || !need_x ? 0 : k * p);
                 for (std::size_t s = 0; s < n; ++s) {
                   for (std::size_t g = 0; g < groups; ++g) {
                     Eigen::Map<const RowMat<T>> gm(o.grad.data() + (s * cout + g * cout_g) * p, cout_g, p);
                     const T* xg = xi->data.data() + (s * cin + g * cin_g) * h * w;
                     if (depthwise) {
                       depthwise_backward(xg, wi->data.data() + g * k, o.grad.data() + (s * cout + g) * p, h, w, kh,
                                          kw, opt.stride, opt.padding, ho, wo,
                                          need_x ? gx + (s * cin + g) * h * w : nullptr,
                                          need_w ? gw + g * k : nullptr);
                       continue;
                     }
                     if (need_w) {
                       const T* colp = xg;
                       if (!pointwise) {
                         im2col(xg, cin_g, h, w, kh, kw, opt.stride, opt.padding, ho, wo, buf.data());
                         colp = buf.data();
                       }
                       Eigen::Map<const RowMat<T>> cm(colp, k, p);
                       Eigen::Map<RowMat<T>> gwm(gw + g * cout_g * k, cout_g, k);
                       gwm.noalias() += gm * cm.transpose();
                     }
                     if (need_x) {
                       Eigen::Map<const RowMat<T>> wm(wi->data.data() + g * cout_g * k, cout_g, k);
                       T* gxg = gx + (s * cin + g * cin_g) * h * w;
                       if (pointwise) {
                         Eigen::Map<RowMat<T>> gxm(gxg, k, p);
                         gxm.noalias() += wm.transpose() * gm;
                       } else {
                         Eigen::Map<RowMat<T>> dm(dcols.data(), k, p);
                         dm.noalias() = wm.transpose() * gm;
                         col2im(dcols.data(), cin_g, h, w, kh, kw, opt.stride, opt.padding, ho, wo, gxg);
                       }
                     }
                   }
                   if (bi && bi->requires_grad) {
                     auto& gb = detail::grad_buffer(*bi);
                     for (std::size_t c = 0; c < cout; ++c) {
                       const T* gc = o.grad.data() + (s * cout + c) * p;
                       T acc = 0;
                       for (std::size_t i = 0; i < p; ++i) acc += gc[i];
                       gb[c] += acc;
                     }
                   }
                 }
               });
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T, BinaryKind::add>(a, b, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T, BinaryKind::sub>(a, b, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T, BinaryKind::mul>(a, b, "mul");
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary(a, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T value) {
  return unary(a, [value](T v) { return v * value; }, [value](T, T) { return value; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  probe_branches(x.impl()->data, [](T v) { return v > 0 ? 1u : 0u; });
  return unary(x, [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  probe_branches(x.impl()->data, [](T v) { return v > 0 ? 1u : 0u; });
  return unary(
      x, [slope](T v) { return v > 0 ? v : slope * v; }, [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  probe_branches(x.impl()->data, [lo, hi](T v) { return v <= lo ? 0u : (v >= hi ? 2u : 1u); });
  return unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  probe_branches(x.impl()->data, [](T v) { return v > 0 ? 1u : (v < 0 ? 2u : 0u); });
  return unary(
      x, [](T v) { return std::abs(v); }, [](T v, T) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "softmax");
  auto out = make_like<T>(x.shape());
  const T* xd = x.impl()->data.data();
  T* od = out.impl()->data.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.axis * sp.inner + in;
      T mx = xd[base];
      for (std::size_t a = 1; a < sp.axis; ++a) mx = std::max(mx, xd[base + a * sp.inner]);
      T total = 0;
      for (std::size_t a = 0; a < sp.axis; ++a) {
        const T e = std::exp(xd[base + a * sp.inner] - mx);
        od[base + a * sp.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < sp.axis; ++a) od[base + a * sp.inner] /= total;
    }
  }
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, sp](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    for (std::size_t ou = 0; ou < sp.outer; ++ou) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = ou * sp.axis * sp.inner + in;
        T dot = 0;
        for (std::size_t a = 0; a < sp.axis; ++a) dot += o.grad[base + a * sp.inner] * o.data[base + a * sp.inner];
        for (std::size_t a = 0; a < sp.axis; ++a) {
          const std::size_t i = base + a * sp.inner;
          gx[i] += o.data[i] * (o.grad[i] - dot);
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> resample(const Tensor<T>& x, Resample mode) {
  require_rank(x.shape(), 4, "resample");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t planes = n * c;
  auto xi = x.impl();
  if (mode == Resample::down2) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw DimensionError("resample down2: spatial extent must be even, got " + x.shape().str());
    }
    const std::size_t ho = h / 2, wo = w / 2;
    auto out = make_like<T>(Shape{n, c, ho, wo});
    T* od = out.impl()->data.data();
    const T* xd = xi->data.data();
    for (std::size_t pl = 0; pl < planes; ++pl) {
      const T* xp = xd + pl * h * w;
      T* op = od + pl * ho * wo;
      for (std::size_t i = 0; i < ho; ++i) {
        const T* r0 = xp + 2 * i * w;
        const T* r1 = r0 + w;
        for (std::size_t j = 0; j < wo; ++j) {
          op[i * wo + j] = T(0.25) * ((r0[2 * j] + r0[2 * j + 1]) + (r1[2 * j] + r1[2 * j + 1]));
        }
      }
    }
    record_op<T>(out, {&x}, [xi, planes, h, w, ho, wo](const Impl<T>& o) {
      auto& gx = detail::grad_buffer(*xi);
      for (std::size_t pl = 0; pl < planes; ++pl) {
        T* gp = gx.data() + pl * h * w;
        const T* go = o.grad.data() + pl * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
          for (std::size_t j = 0; j < wo; ++j) {
            const T g = T(0.25) * go[i * wo + j];
            gp[2 * i * w + 2 * j] += g;
            gp[2 * i * w + 2 * j + 1] += g;
            gp[(2 * i + 1) * w + 2 * j] += g;
            gp[(2 * i + 1) * w + 2 * j + 1] += g;
          }
        }
      }
    });
    return out;
  }

  const std::size_t ho = h * 2, wo = w * 2;
  const Taps ty = upsample_taps(h), tx = upsample_taps(w);
  auto out = make_like<T>(Shape{n, c, ho, wo});
  T* od = out.impl()->data.data();
  const T* xd = xi->data.data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const T* xp = xd + pl * h * w;
    T* op = od + pl * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const T* r0 = xp + ty.i0[oy] * w;
      const T* r1 = xp + ty.i1[oy] * w;
      const T wy = static_cast<T>(ty.w1[oy]);
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const T wx = static_cast<T>(tx.w1[ox]);
        const T top = r0[tx.i0[ox]] + wx * (r0[tx.i1[ox]] - r0[tx.i0[ox]]);
        const T bot = r1[tx.i0[ox]] + wx * (r1[tx.i1[ox]] - r1[tx.i0[ox]]);
        op[oy * wo + ox] = top + wy * (bot - top);
      }
    }
  }
  record_op<T>(out, {&x}, [xi, planes, h, w, ho, wo, ty, tx](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    // Transpose of the separable interpolation: columns first, then rows.
    std::vector<T> rows(ho * w);
    for (std::size_t pl = 0; pl < planes; ++pl) {
      T* gp = gx.data() + pl * h * w;
      const T* go = o.grad.data() + pl * ho * wo;
      std::fill(rows.begin(), rows.end(), T(0));
      for (std::size_t oy = 0; oy < ho; ++oy) {
        T* r = rows.data() + oy * w;
        const T* g = go + oy * wo;
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const T wx = static_cast<T>(tx.w1[ox]);
          r[tx.i0[ox]] += g[ox] * (T(1) - wx);
          r[tx.i1[ox]] += g[ox] * wx;
        }
      }
      for (std::size_t oy = 0; oy < ho; ++oy) {
        const T wy = static_cast<T>(ty.w1[oy]);
        const T* r = rows.data() + oy * w;
        T* top = gp + ty.i0[oy] * w;
        T* bot = gp + ty.i1[oy] * w;
        for (std::size_t ix = 0; ix < w; ++ix) {
          top[ix] += r[ix] * (T(1) - wy);
          bot[ix] += r[ix] * wy;
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw == 0) throw DimensionError("global_avg_pool: empty spatial extent " + x.shape().str());
  auto out = make_like<T>(Shape{n, c, 1, 1});
  const T* xd = x.impl()->data.data();
  for (std::size_t pl = 0; pl < n * c; ++pl) out.impl()->data[pl] = row_sum(xd + pl * hw, hw) / static_cast<T>(hw);
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, n, c, hw](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    for (std::size_t pl = 0; pl < n * c; ++pl) {
      const T g = o.grad[pl] / static_cast<T>(hw);
      for (std::size_t i = 0; i < hw; ++i) gx[pl * hw + i] += g;
    }
  });
  return out;
}

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "channel_mean");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  auto out = make_like<T>(Shape{n, 1, x.dim(2), x.dim(3)});
  const T* xd = x.impl()->data.data();
  T* od = out.impl()->data.data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < hw; ++i) {
      T acc = 0;
      for (std::size_t ch = 0; ch < c; ++ch) acc += xd[(s * c + ch) * hw + i];
      od[s * hw + i] = acc / static_cast<T>(c);
    }
  }
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, n, c, hw](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < hw; ++i) {
        const T g = o.grad[s * hw + i] / static_cast<T>(c);
        for (std::size_t ch = 0; ch < c; ++ch) gx[(s * c + ch) * hw + i] += g;
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0;
  for (const T v : x.data()) acc += static_cast<double>(v);
  auto out = Tensor<T>::scalar(static_cast<T>(acc));
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    for (auto& g : gx) g += o.grad[0];
  });
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  double acc = 0;
  for (const T v : x.data()) acc += static_cast<double>(v);
  const auto count = static_cast<double>(x.numel());
  auto out = Tensor<T>::scalar(static_cast<T>(acc / count));
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, count](const Impl<T>& o) {
    auto& gx = detail::grad_buffer(*xi);
    const T g = static_cast<T>(static_cast<double>(o.grad[0]) / count);
    for (auto& v : gx) v += g;
  });
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  std::vector<std::size_t> dims = first.dims();
  if (axis >= dims.size()) throw DimensionError("concat: axis out of range for " + first.str());
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.rank() == first.rank();
    for (std::size_t i = 0; ok && i < s.rank(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw DimensionError("concat: " + s.str() + " incompatible with " + first.str());
    total += s[axis];
  }
  dims[axis] = total;
  Shape out_shape(dims);
  auto out = make_like<T>(out_shape);
  const auto sp = split_axis(out_shape, axis, "concat");
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    const T* src = p.impl()->data.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(src + o * len * sp.inner, len * sp.inner,
                  out.impl()->data.data() + (o * sp.axis + off) * sp.inner);
    }
    off += len;
  }
  std::vector<std::shared_ptr<Impl<T>>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  record_op<T>(out, parts, [impls, offsets, sp, axis](const Impl<T>& o) {
    for (std::size_t k = 0; k < impls.size(); ++k) {
      if (!impls[k]->requires_grad) continue;
      auto& g = detail::grad_buffer(*impls[k]);
      const std::size_t len = impls[k]->shape[axis];
      for (std::size_t ou = 0; ou < sp.outer; ++ou) {
        const T* src = o.grad.data() + (ou * sp.axis + offsets[k]) * sp.inner;
        T* dst = g.data() + ou * len * sp.inner;
        for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto sp = split_axis(x.shape(), axis, "narrow");
  if (start + length > sp.axis) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis of " + x.shape().str());
  }
  std::vector<std::size_t> dims = x.shape().dims();
  dims[axis] = length;
  auto out = make_like<T>(Shape(dims));
  const T* src = x.impl()->data.data();
  T* dst = out.impl()->data.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(src + (o * sp.axis + start) * sp.inner, length * sp.inner, dst + o * length * sp.inner);
  }
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, sp, start, length](const Impl<T>& o) {
    auto& g = detail::grad_buffer(*xi);
    for (std::size_t ou = 0; ou < sp.outer; ++ou) {
      const T* s = o.grad.data() + ou * length * sp.inner;
      T* d = g.data() + (ou * sp.axis + start) * sp.inner;
      for (std::size_t i = 0; i < length * sp.inner; ++i) d[i] += s[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    throw DimensionError("reshape: cannot view " + x.shape().str() + " as " + shape.str());
  }
  auto out = Tensor<T>::from(std::move(shape), x.impl()->data);
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi](const Impl<T>& o) {
    auto& g = detail::grad_buffer(*xi);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
  return out;
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  const auto plan = plan_broadcast(shape, x.shape(), "broadcast_to");
  auto out = make_like<T>(shape);
  T* od = out.impl()->data.data();
  const T* xd = x.impl()->data.data();
  for_each_broadcast(plan, [&](std::size_t io, std::size_t ix) { od[io] = xd[ix]; });
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, plan](const Impl<T>& o) {
    auto& g = detail::grad_buffer(*xi);
    for_each_broadcast(plan, [&](std::size_t io, std::size_t ix) { g[ix] += o.grad[io]; });
  });
  return out;
}

template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                      std::size_t right) {
  require_rank(x.shape(), 4, "reflect_pad");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (std::max(top, bottom) >= h || std::max(left, right) >= w) {
    throw DimensionError("reflect_pad: padding must be smaller than the spatial extent of " + x.shape().str());
  }
  const std::size_t ho = h + top + bottom, wo = w + left + right;
  std::vector<std::size_t> ry(ho), rx(wo);
  for (std::size_t i = 0; i < ho; ++i) ry[i] = reflect_index(static_cast<long>(i) - static_cast<long>(top), h);
  for (std::size_t j = 0; j < wo; ++j) rx[j] = reflect_index(static_cast<long>(j) - static_cast<long>(left), w);
  auto out = make_like<T>(Shape{x.dim(0), x.dim(1), ho, wo});
  const T* xd = x.impl()->data.data();
  T* od = out.impl()->data.data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) od[(pl * ho + i) * wo + j] = xd[(pl * h + ry[i]) * w + rx[j]];
    }
  }
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, planes, h, w, ho, wo, ry, rx](const Impl<T>& o) {
    auto& g = detail::grad_buffer(*xi);
    for (std::size_t pl = 0; pl < planes; ++pl) {
      for (std::size_t i = 0; i < ho; ++i) {
        for (std::size_t j = 0; j < wo; ++j) g[(pl * h + ry[i]) * w + rx[j]] += o.grad[(pl * ho + i) * wo + j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> flip_width(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "flip_width");
  const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2), w = x.dim(3);
  auto out = make_like<T>(x.shape());
  const T* xd = x.impl()->data.data();
  T* od = out.impl()->data.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) od[r * w + j] = xd[r * w + (w - 1 - j)];
  }
  auto xi = x.impl();
  record_op<T>(out, {&x}, [xi, rows, w](const Impl<T>& o) {
    auto& g = detail::grad_buffer(*xi);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) g[r * w + (w - 1 - j)] += o.grad[r * w + j];
    }
  });
  return out;
}

#define HPGN_INSTANTIATE_OPS(T)                                                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions);         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                     \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                                     \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                           \
  template Tensor<T> tanh(const Tensor<T>&);                                                              \
  template Tensor<T> softplus(const Tensor<T>&);                                                          \
  template Tensor<T> relu(const Tensor<T>&);                                                              \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                     \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                                       \
  template Tensor<T> abs(const Tensor<T>&);                                                               \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                              \
  template Tensor<T> resample(const Tensor<T>&, Resample);                                                \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                   \
  template Tensor<T> channel_mean(const Tensor<T>&);                                                      \
  template Tensor<T> sum(const Tensor<T>&);                                                               \
  template Tensor<T> mean(const Tensor<T>&);                                                              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                                  \
  template Tensor<T> narrow(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                     \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                    \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                        \
  template Tensor<T> reflect_pad(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);   \
  template Tensor<T> flip_width(const Tensor<T>&);

HPGN_INSTANTIATE_OPS(float)
HPGN_INSTANTIATE_OPS(double)

#undef HPGN_INSTANTIATE_OPS

}  // namespace hpgn::ops
