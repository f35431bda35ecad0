#pragma once

// Training configuration and its line-oriented key=value text form.
//
// One "key = value" per line; blank lines and lines starting with '#' are
// ignored; unknown or repeated keys are rejected. Keys:
//   seed, qf_mode (fixed:Q | random:LO:HI), crop, batch, steps, lr, beta1,
//   beta2, eps, width, num_rmrb, num_mrb, trunk_input (light_up | comp),
//   variant (baseline | qf | qm | full), lambda_per, perceptual
//   (random_features | off), perceptual_seed, checkpoint_every, log_every, flip

#include <cstdint>
#include <string>
#include <string_view>

#include "hpgn/losses.hpp"
#include "hpgn/model.hpp"
#include "hpgn/optim.hpp"

namespace hpgn {

struct QfMode {
  enum class Kind { fixed, random };
  Kind kind = Kind::random;
  int qf = 80;
  int lo = 10;
  int hi = 90;

  static QfMode fixed(int q) { return {Kind::fixed, q, q, q}; }
  static QfMode random(int lo, int hi) { return {Kind::random, 80, lo, hi}; }
  /// Accepts "fixed:Q" and "random:LO:HI". Throws ConfigError.
  static QfMode parse(std::string_view text);
  std::string str() const;
  void validate() const;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  QfMode qf_mode = QfMode::random(10, 90);
  std::size_t crop = 64;
  std::size_t batch = 4;
  std::size_t steps = 2000;
  AdamConfig adam;
  ModelConfig model;
  LossConfig loss;
  std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints
  std::size_t log_every = 100;       // 0 disables loss logging
  bool flip = false;

  void validate() const;
  /// Canonical text: every key in documented order, doubles in round-trip precision.
  std::string serialize() const;
  static TrainConfig parse(std::string_view text);
  /// FNV-1a of the canonical text.
  std::uint64_t hash() const;
};

}  // namespace hpgn
