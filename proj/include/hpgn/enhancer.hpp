#pragma once

// Image enhancer: head conv, stacked recursive multi-scale residual blocks,
// tail conv with a global residual to the trunk input.
//
// Every block is in delta form, block(x) = x + f(x), so zeroed parameters
// make the whole trunk the identity.

#include <array>
#include <vector>

#include "hpgn/layers.hpp"

namespace hpgn {

enum class TrunkInput { light_up, comp };

struct EnhancerConfig {
  std::size_t num_rmrb = 4;
  std::size_t num_mrb_per_rmrb = 2;
  std::size_t width = 32;
  TrunkInput trunk_input = TrunkInput::light_up;

  /// Throws ConfigError on invalid fields.
  void validate() const;
};

/// Local 3x3 conv + leaky ReLU, gated per channel by sigmoid(1x1(gap(x))), plus residual.
template <typename T>
struct ContextBlock {
  Conv2d<T> local;
  Conv2d<T> gate;

  static ContextBlock create(std::size_t c, Rng& rng) {
    return {Conv2d<T>::same(c, c, 3, rng), Conv2d<T>::same(c, c, 1, rng)};
  }
  void collect(ParamSet<T>& set, const std::string& prefix) const {
    local.collect(set, prefix + ".local");
    gate.collect(set, prefix + ".gate");
  }
  void zero() {
    local.zero();
    gate.zero();
  }
};

/// Three resolution branches (1, 1/2, 1/4), each with its own context block.
template <typename T>
struct MultiScaleBlock {
  std::array<ContextBlock<T>, 3> branches;
  Conv2d<T> scale_logits;  // 3C -> 3C, 1x1 on pooled branches
  Conv2d<T> channel_fuse;  // C -> C, 1x1

  static MultiScaleBlock create(std::size_t c, Rng& rng) {
    MultiScaleBlock m;
    for (auto& b : m.branches) b = ContextBlock<T>::create(c, rng);
    m.scale_logits = Conv2d<T>::same(3 * c, 3 * c, 1, rng);
    m.channel_fuse = Conv2d<T>::same(c, c, 1, rng);
    return m;
  }
  void collect(ParamSet<T>& set, const std::string& prefix) const {
    for (std::size_t i = 0; i < 3; ++i) branches[i].collect(set, prefix + ".cb" + std::to_string(i));
    scale_logits.collect(set, prefix + ".scale_logits");
    channel_fuse.collect(set, prefix + ".channel_fuse");
  }
  void zero() {
    for (auto& b : branches) b.zero();
    scale_logits.zero();
    channel_fuse.zero();
  }
};

template <typename T>
struct RecursiveBlock {
  std::vector<MultiScaleBlock<T>> blocks;
};

template <typename T>
struct EnhancerParams {
  Conv2d<T> head;  // 3 -> C, 3x3
  std::vector<RecursiveBlock<T>> groups;
  Conv2d<T> tail;  // C -> 3, 3x3

  static EnhancerParams create(const EnhancerConfig& config, Rng& rng);

  std::size_t width() const { return head.out_channels(); }
  void collect(ParamSet<T>& set, const std::string& prefix) const;
  /// Zeroes every learnable tensor.
  void zero();
};

template <typename T>
Tensor<T> context_block(const Tensor<T>& x, const ContextBlock<T>& params);

/// Softmax fusion weights of the three branches, N x 3 x C x 1 (sum to 1 over axis 1).
template <typename T>
struct MrbTrace {
  Tensor<T> fusion_weights;
};

/// Throws DimensionError when H or W is not divisible by 4.
template <typename T>
Tensor<T> mrb_forward(const Tensor<T>& x, const MultiScaleBlock<T>& params, MrbTrace<T>* trace = nullptr);

/// x + sum of the chained blocks' deltas.
template <typename T>
Tensor<T> rmrb_forward(const Tensor<T>& x, const RecursiveBlock<T>& params);

/// head(trunk) [+ features] -> RMRBs -> tail + trunk -> clamp to [0, 1].
/// `features` may be undefined (no injection).
template <typename T>
Tensor<T> enhance(const Tensor<T>& trunk, const Tensor<T>& features, const EnhancerParams<T>& params);

}  // namespace hpgn
