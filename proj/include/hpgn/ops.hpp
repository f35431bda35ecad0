#pragma once

// Differentiable primitives. Image-like tensors follow N x C x H x W.
//
// Binary elementwise ops broadcast the second operand over the first along
// singleton axes (both operands must have the same rank); the result always
// has the first operand's shape.

#include <cstddef>
#include <vector>

#include "hpgn/tensor.hpp"

namespace hpgn::ops {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// Cross-correlation. weight is C_out x (C_in/groups) x k x k; bias is C_out or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options = {});

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T value);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
/// Subgradient 0 outside [lo, hi] and at the bounds' far side.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);
template <typename T>
Tensor<T> abs(const Tensor<T>& x);

/// Softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

enum class Resample { down2, up2 };

/// down2: 2x2 average pooling. up2: bilinear, half-pixel centers (no corner alignment).
template <typename T>
Tensor<T> resample(const Tensor<T>& x, Resample mode);

/// N x C x H x W -> N x C x 1 x 1 spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

/// N x C x H x W -> N x 1 x H x W mean over channels.
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x);

/// Sum / mean of all elements; result has rank 0.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

/// Slice [start, start+length) along `axis`.
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Repeat singleton axes of x to reach `shape` (same rank).
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);

/// Reflection padding (edge not repeated) on the two spatial axes.
template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                      std::size_t right);

/// Mirror along the width axis.
template <typename T>
Tensor<T> flip_width(const Tensor<T>& x);

}  // namespace hpgn::ops
