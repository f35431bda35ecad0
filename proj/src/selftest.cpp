#include "hpgn/selftest.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "hpgn/checkpoint.hpp"
#include "hpgn/dataset.hpp"
#include "hpgn/errors.hpp"
#include "hpgn/metrics.hpp"

namespace hpgn {

namespace {

using Check = std::function<std::string()>;  // empty string means pass

std::string qm_at_50() {
  const auto qm = qf_to_qm(QualityFactor(50), ChannelKind::luma);
  return qm.entries == base_table(ChannelKind::luma) ? "" : "QF 50 luma table differs from the base table";
}

std::string dct_roundtrip() {
  Rng rng(7);
  for (int n = 0; n < 200; ++n) {
    Block8 b{};
    for (auto& v : b) v = static_cast<double>(rng() % 256) - 128.0;
    const auto back = dct8x8(dct8x8(b, DctDirection::forward), DctDirection::inverse);
    for (std::size_t i = 0; i < 64; ++i) {
      if (std::abs(back[i] - b[i]) > 1e-9) return "inverse(forward(x)) != x";
    }
  }
  return "";
}

std::string compress_floor() {
  Rng rng(3);
  const auto img = synthetic_scene(48, 40, rng);
  const double p = psnr(compress_roundtrip(img, QualityFactor(100)), img);
  return p >= 40.0 ? "" : "QF 100 round trip PSNR " + std::to_string(p) + " dB below 40 dB";
}

std::string conv_gradient() {
  Rng rng(11);
  auto x = Tensor<double>::zeros(Shape{2, 3, 5, 4}, true);
  fill_uniform(x, rng, 1.0);
  Conv2d<double> conv(3, 4, 3, rng, ops::Conv2dOptions{1, 1, 1});
  auto loss_of = [&] { return ops::sum(ops::mul(conv(x), conv(x))).item(); };
  Tape<double> tape;
  backward(ops::sum(ops::mul(conv(x), conv(x))));
  const auto analytic = x.grad();
  double worst = 0, scale = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    NoGradGuard<double> guard;
    auto d = x.mutable_data();
    const double keep = d[i];
    d[i] = keep + 1e-4;
    const double up = loss_of();
    d[i] = keep - 1e-4;
    const double down = loss_of();
    d[i] = keep;
    const double numeric = (up - down) / 2e-4;
    worst = std::max(worst, std::abs(numeric - analytic[i]));
    scale = std::max(scale, std::abs(numeric));
  }
  return worst <= 1e-6 * std::max(scale, 1.0) ? "" : "conv2d gradient mismatch " + std::to_string(worst);
}

std::string enhancer_identity() {
  EnhancerConfig cfg;
  cfg.width = 8;
  Rng rng(5);
  auto params = EnhancerParams<double>::create(cfg, rng);
  params.zero();
  auto x = Tensor<double>::zeros(Shape{1, 3, 8, 8});
  fill_uniform(x, rng, 0.5);
  for (auto& v : x.mutable_data()) v += 0.5;
  NoGradGuard<double> guard;
  const auto y = enhance(x, Tensor<double>(), params);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (y.data()[i] != x.data()[i]) return "zero-parameter enhancer is not the identity";
  }
  return "";
}

std::string checkpoint_roundtrip() {
  TrainConfig cfg;
  cfg.model.enhancer.width = 8;
  cfg.model.enhancer.num_rmrb = 1;
  cfg.model.enhancer.num_mrb_per_rmrb = 1;
  const auto model = HpgnModel<float>::create(cfg.model, cfg.seed);
  const Adam<float> adam(model.parameters(), cfg.adam);
  const auto bytes = encode_checkpoint(snapshot(cfg, 0, model, adam, Rng(cfg.seed)));
  return encode_checkpoint(decode_checkpoint(bytes)) == bytes ? "" : "save/load/save is not byte-identical";
}

std::string qf_sampling() {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    if (sample_qf(rng, QfMode::fixed(80)).value() != 80) return "fixed(80) drew another value";
    const int q = sample_qf(rng, QfMode::random(10, 90)).value();
    if (q < 10 || q > 90) return "random(10,90) drew " + std::to_string(q);
  }
  return "";
}

}  // namespace

bool run_selftest(std::ostream& out) {
  const std::pair<const char*, Check> checks[] = {
      {"qm-base-table", qm_at_50},         {"dct-roundtrip", dct_roundtrip},
      {"compress-qf100-floor", compress_floor}, {"conv2d-gradient", conv_gradient},
      {"enhancer-zero-identity", enhancer_identity}, {"checkpoint-roundtrip", checkpoint_roundtrip},
      {"qf-sampling", qf_sampling},
  };
  bool ok = true;
  for (const auto& [name, check] : checks) {
    std::string failure;
    try {
      failure = check();
    } catch (const std::exception& e) {
      failure = std::string("exception: ") + e.what();
    }
    if (failure.empty()) {
      out << "PASS " << name << '\n';
    } else {
      out << "FAIL " << name << ": " << failure << '\n';
      ok = false;
    }
  }
  return ok;
}

}  // namespace hpgn
