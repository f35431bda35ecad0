// Acceptance runner: one PASS/FAIL line per criterion.
//
//   hpgn_acceptance [--work DIR] [criterion ...]
//
// With no criteria listed, all ten run. Criteria 7-9 train the toy
// configuration and write their artifacts under DIR. The result lines are
// also written to DIR/results.txt.

#include <cstddef>
#include <cstdio>

#include <jpeglib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hpgn/checkpoint.hpp"
#include "hpgn/dataset.hpp"
#include "hpgn/enhancer.hpp"
#include "hpgn/hif.hpp"
#include "hpgn/illumination.hpp"
#include "hpgn/jpeg_prior.hpp"
#include "hpgn/losses.hpp"
#include "hpgn/metrics.hpp"
#include "hpgn/model.hpp"
#include "hpgn/training.hpp"
#include "oracles.hpp"
#include "test_common.hpp"

using namespace hpgn;
using namespace hpgn::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// ---------------------------------------------------------------- 1

std::optional<std::array<std::array<int, 64>, 2>> libjpeg_tables(int quality) {
  jpeg_compress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  cinfo.in_color_space = JCS_RGB;
  cinfo.input_components = 3;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  std::array<std::array<int, 64>, 2> out{};
  for (int t = 0; t < 2; ++t) {
    if (!cinfo.quant_tbl_ptrs[t]) {
      jpeg_destroy_compress(&cinfo);
      return std::nullopt;
    }
    // quantval is stored in natural order.
    for (int i = 0; i < 64; ++i) out[t][i] = cinfo.quant_tbl_ptrs[t]->quantval[i];
  }
  jpeg_destroy_compress(&cinfo);
  return out;
}

Outcome qm_oracle() {
  std::size_t mismatches = 0;
  std::string first;
  for (const int q : {10, 25, 50, 75, 80, 90, 100}) {
    const auto ref = libjpeg_tables(q);
    if (!ref) return {false, "libjpeg produced no tables for QF " + std::to_string(q)};
    for (int t = 0; t < 2; ++t) {
      const auto ours = qf_to_qm(QualityFactor(q), t == 0 ? ChannelKind::luma : ChannelKind::chroma);
      for (int i = 0; i < 64; ++i)
        if (ours.entries[i] != (*ref)[t][i]) {
          if (first.empty())
            first = "QF " + std::to_string(q) + (t ? " chroma" : " luma") + " entry " + std::to_string(i) + ": " +
                    std::to_string(ours.entries[i]) + " vs " + std::to_string((*ref)[t][i]);
          ++mismatches;
        }
    }
  }
  if (mismatches) return {false, std::to_string(mismatches) + " mismatching entries, first " + first};
  return {true, "7 QFs x 2 tables match libjpeg " + std::to_string(JPEG_LIB_VERSION) + " exactly"};
}

// ---------------------------------------------------------------- 2

Outcome dct_integrity() {
  Rng rng(2024);
  double worst_roundtrip = 0, worst_parseval = 0;
  for (int n = 0; n < 10000; ++n) {
    Block8 b;
    for (auto& v : b) v = -128.0 + 255.0 * uniform01(rng);
    const auto f = dct8x8(b, DctDirection::forward);
    const auto back = dct8x8(f, DctDirection::inverse);
    double e_space = 0, e_freq = 0;
    for (int i = 0; i < 64; ++i) {
      worst_roundtrip = std::max(worst_roundtrip, std::abs(back[i] - b[i]));
      e_space += b[i] * b[i];
      e_freq += f[i] * f[i];
    }
    worst_parseval = std::max(worst_parseval, std::abs(e_space - e_freq));
  }
  const bool ok = worst_roundtrip <= 1e-6 && worst_parseval <= 1e-6;
  return {ok, "1e4 blocks: max roundtrip error " + fmt("%.3g", worst_roundtrip) + ", max Parseval error " +
                  fmt("%.3g", worst_parseval)};
}

// ---------------------------------------------------------------- 3

std::vector<ImagePair> desk_corpus(const fs::path& root, std::size_t count, std::size_t size, std::uint64_t seed) {
  fs::remove_all(root);
  write_desk_corpus(root, count, size, size, seed);
  return ingest(root);
}

Outcome distortion_monotonicity(const fs::path& work) {
  const auto data = desk_corpus(work / "corpus10", 10, 64, 3);
  std::string detail = "mean PSNR";
  double prev = -1;
  bool ok = true;
  for (const int q : {10, 30, 50, 70, 90}) {
    double total = 0;
    for (const auto& p : data) total += psnr(p.low, compress_roundtrip(p.low, QualityFactor(q)));
    const double mean = total / double(data.size());
    detail += " q" + std::to_string(q) + "=" + fmt("%.2f", mean);
    if (!(mean > prev)) ok = false;
    prev = mean;
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 4

constexpr int kShapes = 10;

struct GradTally {
  std::map<std::string, std::pair<int, double>> per_op;  // shapes checked, worst relative error
  std::string failure;

  void add(const std::string& op, const GradCheckResult& r) {
    auto& [count, worst] = per_op[op];
    if (r.checked == 0 && failure.empty()) failure = op + ": no coordinate checked";
    ++count;
    if (r.rel_error > worst) worst = r.rel_error;
    if (r.rel_error > 1e-5 && failure.empty()) failure = op + ": " + r.worst;
  }
};

Shape small_shape(Rng& rng, std::size_t max_hw = 5) {
  return Shape{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, max_hw), pick(rng, 1, max_hw)};
}

std::vector<Tensor<double>> with_params(std::vector<Tensor<double>> inputs, const ParamSet<double>& set) {
  for (const auto& e : set.entries()) inputs.push_back(e.tensor);
  return inputs;
}

std::vector<QuantizationMatrix> luma_qms(const std::vector<QualityFactor>& qfs) {
  std::vector<QuantizationMatrix> out;
  for (const auto q : qfs) out.push_back(qf_to_qm(q, ChannelKind::luma));
  return out;
}

std::vector<QualityFactor> random_qfs(Rng& rng, std::size_t n) {
  std::vector<QualityFactor> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(int(pick(rng, 1, 100)));
  return out;
}

EnhancerConfig tiny_enhancer(std::size_t width, std::size_t rmrb, std::size_t mrb) {
  EnhancerConfig c;
  c.width = width;
  c.num_rmrb = rmrb;
  c.num_mrb_per_rmrb = mrb;
  return c;
}

Outcome gradient_suite() {
  Rng rng(4);
  GradTally tally;
  for (int t = 0; t < kShapes; ++t) {
    {
      const std::size_t groups = pick(rng, 1, 2);
      const std::size_t cin = groups * pick(rng, 1, 2), cout = groups * pick(rng, 1, 2);
      const std::size_t k = pick(rng, 1, 3), stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
      const std::size_t hw = k + pick(rng, 1, 4);
      const auto x = random_tensor(Shape{pick(rng, 1, 2), cin, hw, hw + 1}, rng);
      const auto w = random_tensor(Shape{cout, cin / groups, k, k}, rng);
      const auto b = random_tensor(Shape{cout}, rng);
      tally.add("conv2d", check_op([&](const auto& in) { return ops::conv2d(in[0], in[1], in[2], {stride, pad, groups}); },
                                   {x, w, b}, rng));
    }
    {
      const auto shape = small_shape(rng);
      const Shape bshape = t % 2 ? Shape{shape[0], shape[1], 1, 1} : shape;
      const auto a = random_tensor(shape, rng, -2, 2), b = random_tensor(bshape, rng);
      tally.add("add", check_op([](const auto& in) { return ops::add(in[0], in[1]); }, {a, b}, rng));
      tally.add("sub", check_op([](const auto& in) { return ops::sub(in[0], in[1]); }, {a, b}, rng));
      tally.add("mul", check_op([](const auto& in) { return ops::mul(in[0], in[1]); }, {a, b}, rng));
      tally.add("scalar affine",
                check_op([](const auto& in) { return ops::add_scalar(ops::mul_scalar(in[0], 1.7), -0.3); }, {a}, rng));
      tally.add("sigmoid", check_op([](const auto& in) { return ops::sigmoid(in[0]); }, {a}, rng));
      tally.add("tanh", check_op([](const auto& in) { return ops::tanh(in[0]); }, {a}, rng));
      tally.add("softplus", check_op([](const auto& in) { return ops::softplus(in[0]); }, {a}, rng));
      tally.add("relu", check_op([](const auto& in) { return ops::relu(in[0]); }, {a}, rng));
      tally.add("leaky_relu", check_op([](const auto& in) { return ops::leaky_relu(in[0], 0.2); }, {a}, rng));
      tally.add("clamp", check_op([](const auto& in) { return ops::clamp(in[0], -0.5, 0.8); }, {a}, rng));
      tally.add("abs", check_op([](const auto& in) { return ops::abs(in[0]); }, {a}, rng));
      tally.add("softmax", check_op([](const auto& in) { return ops::softmax(in[0], 1); }, {a}, rng));
    }
    {
      const auto s = small_shape(rng, 3);
      const auto x = random_tensor(Shape{s[0], s[1], 2 * s[2], 2 * s[3]}, rng);
      tally.add("down2", check_op([](const auto& in) { return ops::resample(in[0], ops::Resample::down2); }, {x}, rng));
      tally.add("up2", check_op([](const auto& in) { return ops::resample(in[0], ops::Resample::up2); }, {x}, rng));
      tally.add("global_avg_pool", check_op([](const auto& in) { return ops::global_avg_pool(in[0]); }, {x}, rng));
      tally.add("channel_mean", check_op([](const auto& in) { return ops::channel_mean(in[0]); }, {x}, rng));
    }
    {
      const std::size_t c = pick(rng, 2, 4);
      const auto est = IlluminationEstimator<double>::create(c, rng);
      const auto x = random_tensor(Shape{pick(rng, 1, 2), 3, pick(rng, 3, 7), pick(rng, 3, 7)}, rng, 0, 1);
      ParamSet<double> set;
      est.collect(set, "estimator");
      tally.add("estimator", check_op(
                                 [&](const auto&) {
                                   const auto out = estimate(x, illum_prior(x), est);
                                   return ops::concat<double>({out.brightness, out.features}, 1);
                                 },
                                 with_params({x}, set), rng, 30));
    }
    {
      const std::size_t c = pick(rng, 2, 4), n = pick(rng, 1, 2);
      const auto p = HifParams<double>::create(c, rng);
      const auto f = random_tensor(Shape{n, c, pick(rng, 2, 5), pick(rng, 2, 5)}, rng);
      const auto qfs = random_qfs(rng, n);
      const auto qms = luma_qms(qfs);
      ParamSet<double> qf_set, qm_set, all;
      p.collect(qf_set, "hif", true, false);
      p.collect(qm_set, "hif", false, true);
      p.collect(all, "hif");
      tally.add("hif qf branch", check_op([&](const auto&) { return qf_branch(f, qfs, p); },
                                          with_params({f}, qf_set), rng, 20));
      tally.add("hif qm branch",
                check_op([&](const auto&) { return qm_branch(f, std::span<const QuantizationMatrix>(qms), p); },
                         with_params({f}, qm_set), rng, 20));
      tally.add("hif", check_op([&](const auto&) { return hif_forward(f, qfs, qms, p); }, with_params({f}, all), rng, 20));
    }
    {
      const std::size_t c = pick(rng, 1, 3);
      const auto cb = ContextBlock<double>::create(c, rng);
      const auto x = random_tensor(Shape{pick(rng, 1, 2), c, pick(rng, 2, 5), pick(rng, 2, 5)}, rng);
      ParamSet<double> set;
      cb.collect(set, "cb");
      tally.add("context block", check_op([&](const auto&) { return context_block(x, cb); }, with_params({x}, set), rng, 30));
    }
    {
      const std::size_t c = pick(rng, 1, 3);
      const auto mrb = MultiScaleBlock<double>::create(c, rng);
      const auto x = random_tensor(Shape{pick(rng, 1, 2), c, 4 * pick(rng, 1, 2), 4 * pick(rng, 1, 2)}, rng);
      ParamSet<double> set;
      mrb.collect(set, "mrb");
      tally.add("mrb", check_op([&](const auto&) { return mrb_forward(x, mrb); }, with_params({x}, set), rng, 20));
    }
    {
      const std::size_t c = pick(rng, 1, 2);
      RecursiveBlock<double> group;
      for (std::size_t i = 0; i < 2; ++i) group.blocks.push_back(MultiScaleBlock<double>::create(c, rng));
      const auto x = random_tensor(Shape{1, c, 4 * pick(rng, 1, 2), 4 * pick(rng, 1, 2)}, rng);
      ParamSet<double> set;
      for (std::size_t i = 0; i < 2; ++i) group.blocks[i].collect(set, "rmrb.mrb" + std::to_string(i));
      tally.add("rmrb", check_op([&](const auto&) { return rmrb_forward(x, group); }, with_params({x}, set), rng, 12));
    }
    {
      const std::size_t c = 4;
      auto p = EnhancerParams<double>::create(tiny_enhancer(c, 1, 1), rng);
      // Small tail keeps the output inside the clamp so every parameter has signal.
      for (auto& v : p.tail.weight.mutable_data()) v *= 0.05;
      for (auto& v : p.tail.bias.mutable_data()) v = 0;
      const std::size_t n = pick(rng, 1, 2), h = 4 * pick(rng, 1, 2), w = 4 * pick(rng, 1, 2);
      const auto x = random_tensor(Shape{n, 3, h, w}, rng, 0.3, 0.7);
      const auto f = random_tensor(Shape{n, c, h, w}, rng);
      ParamSet<double> set;
      p.collect(set, "enhancer");
      tally.add("enhance", check_op([&](const auto&) { return enhance(x, f, p); }, with_params({x, f}, set), rng, 12));
    }
    {
      const auto shape = Shape{pick(rng, 1, 2), 3, pick(rng, 2, 6), pick(rng, 2, 6)};
      const auto a = random_tensor(shape, rng, 0, 1), b = random_tensor(shape, rng, 0, 1);
      tally.add("l1 loss", gradcheck([&] { return l1_loss(a, b); }, {a, b}, 1e-4));
    }
    {
      const std::size_t hw = 16 + 4 * pick(rng, 0, 2);
      const auto a = random_tensor(Shape{1, 3, hw, hw}, rng, 0, 1), b = random_tensor(Shape{1, 3, hw, hw}, rng, 0, 1);
      const PerceptualExtractor<double> phi(pick(rng, 1, 1000));
      tally.add("perceptual loss", gradcheck([&] { return phi.loss(a, b); }, {a, b}, 1e-4, 48));
    }
  }
  double worst = 0;
  int fewest = kShapes;
  for (const auto& [op, entry] : tally.per_op) {
    worst = std::max(worst, entry.second);
    fewest = std::min(fewest, entry.first);
  }
  const bool ok = tally.failure.empty() && fewest >= kShapes;
  std::string detail = std::to_string(tally.per_op.size()) + " operations x " + std::to_string(fewest) +
                       " shapes, worst relative error " + fmt("%.3g", worst);
  if (!ok) detail += "; " + tally.failure;
  return {ok, detail};
}

// ---------------------------------------------------------------- 5

Outcome identities() {
  Rng rng(5);
  std::size_t violations = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t c = 4 * pick(rng, 1, 2);
    auto p = EnhancerParams<double>::create(tiny_enhancer(c, pick(rng, 1, 3), pick(rng, 1, 2)), rng);
    p.zero();
    const std::size_t n = pick(rng, 1, 2), h = 4 * pick(rng, 1, 3), w = 4 * pick(rng, 1, 3);
    const auto x = random_tensor(Shape{n, 3, h, w}, rng, 0, 1);
    const auto f = random_tensor(Shape{n, c, h, w}, rng, -2, 2);
    for (const auto& features : {Tensor<double>(), f}) {
      const auto y = enhance(x, features, p);
      for (std::size_t i = 0; i < x.numel(); ++i) violations += y.at(i) != x.at(i);
    }
  }
  for (int t = 0; t < 20; ++t) {
    const std::size_t c = pick(rng, 1, 6), n = pick(rng, 1, 3);
    auto p = HifParams<double>::create(c, rng);
    p.qf_mlp.output_layer().zero();
    p.qm_spatial.zero();
    const auto f = random_tensor(Shape{n, c, pick(rng, 1, 6), pick(rng, 1, 6)}, rng, -3, 3);
    const auto qfs = random_qfs(rng, n);
    const auto qms = luma_qms(qfs);
    const auto half = hif_forward(f, qfs, qms, p);
    for (std::size_t i = 0; i < f.numel(); ++i) violations += half.at(i) != f.at(i) + f.at(i) * 0.5;
    for (auto& v : p.qm_spatial.bias.mutable_data()) v = -1e4;
    const auto exact = hif_forward(f, qfs, qms, p);
    for (std::size_t i = 0; i < f.numel(); ++i) violations += exact.at(i) != f.at(i);
  }
  return {violations == 0, "20 zeroed enhancers, 20 zeroed filters: " + std::to_string(violations) + " inexact values"};
}

// ---------------------------------------------------------------- 6

Outcome faithfulness() {
  Rng rng(6);
  std::size_t prior_bad = 0, light_bad = 0, fuse_bad = 0;
  double l1_err = 0, psnr_err = 0, ssim_err = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 1, 9), w = pick(rng, 1, 9);
    const std::size_t plane = h * w;
    const auto x = random_tensor(Shape{n, 3, h, w}, rng, 0, 1);
    const auto prior = illum_prior(x).map;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t i = 0; i < plane; ++i) {
        const double expect =
            (x.at((s * 3 + 0) * plane + i) + x.at((s * 3 + 1) * plane + i) + x.at((s * 3 + 2) * plane + i)) / 3.0;
        prior_bad += prior.at(s * plane + i) != expect;
      }
    const auto bri = random_tensor(x.shape(), rng, 0.01, 4);
    const auto lit = light_up(bri, x);
    for (std::size_t i = 0; i < x.numel(); ++i) light_bad += lit.at(i) != bri.at(i) * x.at(i);
    const auto a = random_tensor(Shape{n, pick(rng, 1, 5), h, w}, rng), b = random_tensor(a.shape(), rng);
    const auto fused = fuse(a, b);
    for (std::size_t i = 0; i < a.numel(); ++i) fuse_bad += fused.at(i) != a.at(i) + b.at(i);
    const auto y = random_tensor(x.shape(), rng, 0, 1);
    l1_err = std::max(l1_err, std::abs(l1_loss(x, y).item() - direct_l1(x, y)));
    const auto img = random_image(11 + pick(rng, 0, 20), 11 + pick(rng, 0, 20), rng);
    Image8 other = img;
    for (auto& p : other.pixels) p = static_cast<std::uint8_t>(std::clamp(int(p) + int(pick(rng, 0, 60)) - 30, 0, 255));
    psnr_err = std::max(psnr_err, std::abs(psnr(img, other) - direct_psnr(img, other)));
    ssim_err = std::max(ssim_err, std::abs(ssim(img, other) - direct_ssim(img, other)));
  }
  const bool ok = prior_bad == 0 && light_bad == 0 && fuse_bad == 0 && l1_err <= 1e-7 && psnr_err <= 1e-9 &&
                  ssim_err <= 1e-9;
  return {ok, "100 instances: inexact prior/light-up/fuse " + std::to_string(prior_bad) + "/" +
                  std::to_string(light_bad) + "/" + std::to_string(fuse_bad) + ", l1 " + fmt("%.2g", l1_err) +
                  ", psnr " + fmt("%.2g", psnr_err) + ", ssim " + fmt("%.2g", ssim_err)};
}

// ---------------------------------------------------------------- 7-9

TrainConfig toy_config() {
  TrainConfig c;
  c.seed = 1;
  c.qf_mode = QfMode::random(10, 90);
  c.crop = 64;
  c.batch = 4;
  c.steps = 2000;
  c.model.enhancer = tiny_enhancer(32, 4, 2);
  c.log_every = 100;
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0 : v[v.size() / 2];
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct ToyRun {
  TrainResult result;
  MetricsReport report;  // fixed QF 80 on the training pairs
  double seconds = 0;
};

constexpr std::uint64_t kEvalSeed = 11;

ToyRun run_toy(const TrainConfig& config, const std::vector<ImagePair>& data, const std::string& tag) {
  ToyRun run;
  const auto start = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_log = [&](std::size_t step, double loss) {
    if (step % 500 == 0) std::cerr << "  [" << tag << "] step " << step << " loss " << loss << '\n';
  };
  run.result = train(config, data, hooks);
  run.seconds = seconds_since(start);
  run.report = evaluate(run.result.checkpoint, data, QfMode::fixed(80), kEvalSeed);
  return run;
}

struct Session {
  fs::path work;
  std::vector<ImagePair> data;
  std::optional<ToyRun> first;

  const ToyRun& toy() {
    if (!first) {
      first = run_toy(toy_config(), data, "run 1");
      save_checkpoint(work / "toy_run1.ckpt", first->result.checkpoint);
      write_report(work / "toy_run1.report", first->report);
    }
    return *first;
  }
};

Outcome overfit_sanity(Session& s) {
  const auto& run = s.toy();
  const auto config = toy_config();
  const auto model = restore_model(run.result.checkpoint);
  const auto crops = score_training_crops(model, s.data, config, 77, 8);
  const double crop_gain = crops.enhanced_psnr - crops.compressed_psnr;

  TrainConfig untrained_cfg = config;
  untrained_cfg.steps = 0;
  const auto untrained = train(untrained_cfg, s.data).checkpoint;
  const auto before = evaluate(untrained, s.data, QfMode::fixed(80), kEvalSeed);
  const double eval_gain = run.report.mean_psnr() - before.mean_psnr();

  const auto& losses = run.result.losses;
  const std::vector<double> head(losses.begin(), losses.begin() + 100), tail(losses.end() - 100, losses.end());
  const auto held_out = desk_corpus(s.work / "heldout", 4, 96, 99);
  const double held_en = evaluate(run.result.checkpoint, held_out, QfMode::fixed(80), kEvalSeed).mean_psnr();
  const double held_comp = evaluate_passthrough(held_out, QfMode::fixed(80), kEvalSeed).mean_psnr();

  std::cout << "  training time " << fmt("%.0f", run.seconds) << " s; loss median first/last 100 steps "
            << fmt("%.4f", median(head)) << " / " << fmt("%.4f", median(tail)) << '\n'
            << "  held-out pairs at QF 80: enhanced " << fmt("%.2f", held_en) << " dB, compressed input "
            << fmt("%.2f", held_comp) << " dB\n";

  const bool ok = crop_gain >= 4.0 && eval_gain >= 3.0;
  return {ok, "training crops " + fmt("%.2f", crops.enhanced_psnr) + " vs " + fmt("%.2f", crops.compressed_psnr) +
                  " dB (gain " + fmt("%.2f", crop_gain) + "); QF 80 eval " + fmt("%.2f", run.report.mean_psnr()) +
                  " vs untrained " + fmt("%.2f", before.mean_psnr()) + " dB (gain " + fmt("%.2f", eval_gain) + ")"};
}

Outcome ablation_harness(Session& s) {
  const auto& run = s.toy();
  const auto start = std::chrono::steady_clock::now();
  AblationOptions options;
  options.full_run = &run.result;
  options.on_log = [](Variant v, std::size_t step, double loss) {
    if (step % 500 == 0) std::cerr << "  [" << to_string(v) << "] step " << step << " loss " << loss << '\n';
  };
  const auto rows = ablation(toy_config(), s.data, s.data, QfMode::fixed(80), options);
  const auto table = format_ablation_table(rows);
  write_text(s.work / "ablation.md", table);
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) std::cout << "  " << line << '\n';

  if (rows.size() != 4) return {false, "expected 4 rows, got " + std::to_string(rows.size())};
  const auto find = [&](Variant v) {
    return *std::find_if(rows.begin(), rows.end(), [&](const AblationRow& r) { return r.variant == v; });
  };
  const double full = find(Variant::full).final_loss, base = find(Variant::baseline).final_loss;
  const double minutes = (seconds_since(start) + run.seconds) / 60;
  return {full <= base, "final-step loss full " + fmt("%.5f", full) + " vs baseline " + fmt("%.5f", base) + ", " +
                            fmt("%.1f", minutes) + " min for four variants"};
}

Outcome determinism(Session& s) {
  s.toy();
  const auto second = run_toy(toy_config(), s.data, "run 2");
  save_checkpoint(s.work / "toy_run2.ckpt", second.result.checkpoint);
  write_report(s.work / "toy_run2.report", second.report);
  const auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool ckpt_same = read(s.work / "toy_run1.ckpt") == read(s.work / "toy_run2.ckpt");
  const bool report_same = read(s.work / "toy_run1.report") == read(s.work / "toy_run2.report");
  return {ckpt_same && report_same, std::string("checkpoint bytes ") + (ckpt_same ? "identical" : "differ") +
                                        ", report bytes " + (report_same ? "identical" : "differ") + " (" +
                                        std::to_string(fs::file_size(s.work / "toy_run1.ckpt")) + " byte checkpoint)"};
}

// ---------------------------------------------------------------- 10

Outcome qf_sampling() {
  Rng rng(10);
  const auto mode = QfMode::random(10, 90);
  std::array<int, 81> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const int q = sample_qf(rng, mode).value();
    if (q < 10 || q > 90) return {false, "draw outside [10, 90]: " + std::to_string(q)};
    ++counts[q - 10];
  }
  const double expected = draws / 81.0;
  double chi2 = 0;
  for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // Upper 1% point of chi-square with 80 degrees of freedom.
  const double critical = 112.329;
  std::set<int> fixed_values;
  for (int i = 0; i < draws; ++i) fixed_values.insert(sample_qf(rng, QfMode::fixed(80)).value());
  const bool fixed_ok = fixed_values == std::set<int>{80};
  return {chi2 <= critical && fixed_ok, "chi-square " + fmt("%.2f", chi2) + " (critical " + fmt("%.2f", critical) +
                                            "), fixed(80) " + (fixed_ok ? "constant" : "not constant")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      try {
        selected.insert(std::stoi(arg));
      } catch (const std::exception&) {
        std::cerr << "usage: hpgn_acceptance [--work DIR] [criterion ...]\n";
        return 2;
      }
    }
  }
  if (selected.empty())
    for (int c = 1; c <= 10; ++c) selected.insert(c);
  fs::create_directories(work);

  Session session{work, {}, std::nullopt};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"QM oracle", qm_oracle},
      {"DCT integrity", dct_integrity},
      {"distortion monotonicity", [&] { return distortion_monotonicity(work); }},
      {"gradient suite", gradient_suite},
      {"identity contracts", identities},
      {"direct-definition oracles", faithfulness},
      {"overfit sanity", [&] { return overfit_sanity(session); }},
      {"ablation harness", [&] { return ablation_harness(session); }},
      {"determinism", [&] { return determinism(session); }},
      {"random-QF strategy", qf_sampling},
  };

  std::ofstream results(work / "results.txt");
  int failures = 0;
  for (const int c : selected) {
    if (c < 1 || c > 10) continue;
    if (c >= 7 && session.data.empty()) session.data = desk_corpus(work / "corpus4", 4, 96, 7);
    const auto& [name, fn] = criteria[c - 1];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    const std::string line = "criterion " + std::to_string(c) + " " + (o.pass ? "PASS" : "FAIL") + " [" + name +
                             "] " + o.detail + " (" + fmt("%.1f", seconds_since(start)) + " s)";
    std::cout << line << std::endl;
    results << line << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
