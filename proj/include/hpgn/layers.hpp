#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hpgn/ops.hpp"
#include "hpgn/tensor.hpp"

namespace hpgn {

using Rng = std::mt19937_64;

/// Named, ordered collection of learnable tensors. Entries share storage with
/// the modules that registered them; order is registration order.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  void add(std::string name, const Tensor<T>& tensor) {
    for (const auto& e : entries_) {
      if (e.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
    }
    entries_.push_back({std::move(name), tensor});
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e.tensor;
    }
    return nullptr;
  }

  void zero_grads() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
};

/// Uniform(-bound, bound) fill.
template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double bound) {
  // Explicit 53-bit mapping keeps initialization identical across standard libraries.
  for (auto& v : t.mutable_data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = static_cast<T>(bound * (2.0 * u - 1.0));
  }
}

/// Weight + optional bias of a 2-d convolution, initialized U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
struct Conv2d {
  Tensor<T> weight;
  Tensor<T> bias;
  ops::Conv2dOptions options;

  Conv2d() = default;

  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng,
         ops::Conv2dOptions opts = {}, bool with_bias = true)
      : options(opts) {
    const std::size_t in_per_group = in_channels / opts.groups;
    weight = Tensor<T>::zeros(Shape{out_channels, in_per_group, kernel, kernel}, true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_per_group * kernel * kernel));
    fill_uniform(weight, rng, bound);
    if (with_bias) {
      bias = Tensor<T>::zeros(Shape{out_channels}, true);
      fill_uniform(bias, rng, bound);
    }
  }

  /// "Same" convolution: stride 1, padding k/2.
  static Conv2d same(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng,
                     std::size_t groups = 1) {
    return Conv2d(in_channels, out_channels, kernel, rng, ops::Conv2dOptions{1, kernel / 2, groups});
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::conv2d(x, weight, bias, options); }

  std::size_t out_channels() const { return weight.dim(0); }

  void zero() {
    for (auto& v : weight.mutable_data()) v = T(0);
    if (bias.defined()) {
      for (auto& v : bias.mutable_data()) v = T(0);
    }
  }

  void collect(ParamSet<T>& set, const std::string& prefix) const {
    set.add(prefix + ".weight", weight);
    if (bias.defined()) set.add(prefix + ".bias", bias);
  }
};

/// Stack of 1x1 convolutions acting on N x K x 1 x 1 vectors (a fully connected
/// network), leaky-ReLU between layers, linear output.
template <typename T>
struct Mlp {
  std::vector<Conv2d<T>> layers;

  Mlp() = default;
  Mlp(const std::vector<std::size_t>& widths, Rng& rng) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1], 1, rng);
  }

  Tensor<T> operator()(Tensor<T> x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](x);
      if (i + 1 < layers.size()) x = ops::leaky_relu(x, T(0.2));
    }
    return x;
  }

  Conv2d<T>& output_layer() { return layers.back(); }

  void collect(ParamSet<T>& set, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(set, prefix + "." + std::to_string(i));
  }
};

}  // namespace hpgn
