#include "hpgn/enhancer.hpp"

#include <string>

namespace hpgn {

void EnhancerConfig::validate() const {
  if (num_rmrb < 1) throw ConfigError("enhancer: num_rmrb must be >= 1");
  if (num_mrb_per_rmrb < 1) throw ConfigError("enhancer: num_mrb_per_rmrb must be >= 1");
  if (width < 4 || width % 4 != 0) {
    throw ConfigError("enhancer: width must be a multiple of 4 and at least 4, got " + std::to_string(width));
  }
}

template <typename T>
EnhancerParams<T> EnhancerParams<T>::create(const EnhancerConfig& config, Rng& rng) {
  config.validate();
  const std::size_t c = config.width;
  EnhancerParams p;
  p.head = Conv2d<T>::same(3, c, 3, rng);
  p.groups.resize(config.num_rmrb);
  for (auto& g : p.groups) {
    for (std::size_t i = 0; i < config.num_mrb_per_rmrb; ++i) g.blocks.push_back(MultiScaleBlock<T>::create(c, rng));
  }
  p.tail = Conv2d<T>::same(c, 3, 3, rng);
  return p;
}

template <typename T>
void EnhancerParams<T>::collect(ParamSet<T>& set, const std::string& prefix) const {
  head.collect(set, prefix + ".head");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t b = 0; b < groups[g].blocks.size(); ++b) {
      groups[g].blocks[b].collect(set, prefix + ".rmrb" + std::to_string(g) + ".mrb" + std::to_string(b));
    }
  }
  tail.collect(set, prefix + ".tail");
}

template <typename T>
void EnhancerParams<T>::zero() {
  head.zero();
  for (auto& g : groups) {
    for (auto& b : g.blocks) b.zero();
  }
  tail.zero();
}

template <typename T>
Tensor<T> context_block(const Tensor<T>& x, const ContextBlock<T>& params) {
  const auto local = ops::leaky_relu(params.local(x), T(0.2));
  const auto gate = ops::sigmoid(params.gate(ops::global_avg_pool(x)));
  return ops::add(ops::mul(local, gate), x);
}

namespace {

template <typename T>
Tensor<T> mrb_delta(const Tensor<T>& x, const MultiScaleBlock<T>& params, MrbTrace<T>* trace) {
  if (x.shape().rank() != 4 || x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0) {
    throw DimensionError("mrb: spatial extent of " + x.shape().str() +
                         " must be divisible by 4; pad the input (reflection) and crop afterwards");
  }
  const std::size_t n = x.dim(0), c = x.dim(1);
  const auto half = ops::resample(x, ops::Resample::down2);
  const auto quarter = ops::resample(half, ops::Resample::down2);
  const auto b0 = context_block(x, params.branches[0]);
  const auto b1 = ops::resample(context_block(half, params.branches[1]), ops::Resample::up2);
  const auto b2 = ops::resample(
      ops::resample(context_block(quarter, params.branches[2]), ops::Resample::up2), ops::Resample::up2);

  const auto pooled = ops::global_avg_pool(ops::concat<T>({b0, b1, b2}, 1));
  const auto logits = ops::reshape(params.scale_logits(pooled), Shape{n, 3, c, 1});
  const auto weights = ops::softmax(logits, 1);
  if (trace) trace->fusion_weights = weights;

  auto weight_of = [&](std::size_t k) { return ops::reshape(ops::narrow(weights, 1, k, 1), Shape{n, c, 1, 1}); };
  const auto mixed = ops::add(ops::add(ops::mul(b0, weight_of(0)), ops::mul(b1, weight_of(1))),
                              ops::mul(b2, weight_of(2)));
  return params.channel_fuse(mixed);
}

}  // namespace

template <typename T>
Tensor<T> mrb_forward(const Tensor<T>& x, const MultiScaleBlock<T>& params, MrbTrace<T>* trace) {
  return ops::add(x, mrb_delta(x, params, trace));
}

template <typename T>
Tensor<T> rmrb_forward(const Tensor<T>& x, const RecursiveBlock<T>& params) {
  Tensor<T> y = x;
  Tensor<T> accumulated;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const auto delta = mrb_delta<T>(y, params.blocks[i], nullptr);
    if (i + 1 < params.blocks.size()) y = ops::add(y, delta);
    accumulated = accumulated.defined() ? ops::add(accumulated, delta) : delta;
  }
  return ops::add(x, accumulated);
}

template <typename T>
Tensor<T> enhance(const Tensor<T>& trunk, const Tensor<T>& features, const EnhancerParams<T>& params) {
  const auto& s = trunk.shape();
  if (s.rank() != 4 || s[1] != 3) throw DimensionError("enhance: expected N x 3 x H x W input, got " + s.str());
  if (s[2] % 4 != 0 || s[3] % 4 != 0) {
    throw DimensionError("enhance: spatial extent of " + s.str() + " must be divisible by 4");
  }
  auto h = params.head(trunk);
  if (features.defined()) {
    if (!(features.shape() == h.shape())) {
      throw DimensionError("enhance: features " + features.shape().str() + " do not match trunk width " +
                           h.shape().str());
    }
    h = ops::add(h, features);
  }
  for (const auto& g : params.groups) h = rmrb_forward(h, g);
  return ops::clamp(ops::add(params.tail(h), trunk), T(0), T(1));
}

#define HPGN_INSTANTIATE_ENHANCER(T)                                                              \
  template struct EnhancerParams<T>;                                                              \
  template Tensor<T> context_block(const Tensor<T>&, const ContextBlock<T>&);                     \
  template Tensor<T> mrb_forward(const Tensor<T>&, const MultiScaleBlock<T>&, MrbTrace<T>*);      \
  template Tensor<T> rmrb_forward(const Tensor<T>&, const RecursiveBlock<T>&);                    \
  template Tensor<T> enhance(const Tensor<T>&, const Tensor<T>&, const EnhancerParams<T>&);

HPGN_INSTANTIATE_ENHANCER(float)
HPGN_INSTANTIATE_ENHANCER(double)

#undef HPGN_INSTANTIATE_ENHANCER

}  // namespace hpgn
