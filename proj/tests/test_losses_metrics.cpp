#include <doctest.h>

#include <cmath>

#include "hpgn/dataset.hpp"
#include "hpgn/errors.hpp"
#include "hpgn/losses.hpp"
#include "hpgn/metrics.hpp"
#include "oracles.hpp"
#include "test_common.hpp"

using namespace hpgn;
using namespace hpgn::testing;

namespace {

Image8 add_noise(const Image8& img, int amplitude, std::uint64_t seed) {
  Rng rng(seed);
  Image8 out = img;
  for (auto& p : out.pixels) {
    const int sign = (rng() & 1) ? 1 : -1;
    p = static_cast<std::uint8_t>(std::clamp(int(p) + sign * amplitude, 0, 255));
  }
  return out;
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("l1 examples") {
    Rng rng(90);
    const auto a = random_tensor(Shape{2, 3, 4, 4}, rng);
    CHECK(l1_loss(a, a).item() == 0.0);
    CHECK(l1_loss(a, ops::add_scalar(a, 0.25)).item() == doctest::Approx(0.25).epsilon(1e-12));
    const auto b = random_tensor(Shape{2, 3, 4, 4}, rng);
    CHECK(std::abs(l1_loss(a, b).item() - direct_l1(a, b)) <= 1e-7);
    CHECK_THROWS_AS(l1_loss(a, Tensor<double>::zeros(Shape{2, 3, 4, 5})), DimensionError);
  }

  TEST_CASE("perceptual: zero on identical input, symmetric, seed-determined") {
    Rng rng(91);
    const auto a = random_tensor(Shape{1, 3, 32, 32}, rng, 0, 1);
    const auto b = random_tensor(Shape{1, 3, 32, 32}, rng, 0, 1);
    CHECK(perceptual_loss(a, a, 19).item() == 0.0);
    CHECK(perceptual_loss(a, b, 19).item() == perceptual_loss(b, a, 19).item());
    CHECK(perceptual_loss(a, b, 19).item() == perceptual_loss(a, b, 19).item());
    CHECK(perceptual_loss(a, b, 19).item() != perceptual_loss(a, b, 20).item());
    CHECK(perceptual_loss(a, b, 19).item() > 0.0);
    CHECK_THROWS_AS(perceptual_loss(Tensor<double>::zeros(Shape{1, 3, 8, 32}), Tensor<double>::zeros(Shape{1, 3, 8, 32}), 1),
                    DimensionError);
  }

  TEST_CASE("perceptual extractor is frozen") {
    Rng rng(92);
    const PerceptualExtractor<double> phi(5);
    auto a = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1, true);
    const auto b = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
    const double before = phi.loss(a, b).item();
    {
      Tape<double> tape;
      backward(phi.loss(a, b));
    }
    CHECK(a.has_grad());
    for (const auto& f : phi.features(b)) CHECK_FALSE(f.requires_grad());
    CHECK(phi.loss(a, b).item() == before);
  }

  TEST_CASE("total loss composition") {
    Rng rng(93);
    const auto a = random_tensor(Shape{2, 3, 16, 16}, rng, 0, 1);
    const auto b = random_tensor(Shape{2, 3, 16, 16}, rng, 0, 1);
    LossConfig cfg;
    const double expected = l1_loss(a, b).item() + 0.01 * perceptual_loss(a, b, cfg.extractor_seed).item();
    CHECK(std::abs(total_loss(a, b, cfg).item() - expected) <= 1e-7);
    const PerceptualExtractor<double> phi(cfg.extractor_seed);
    CHECK(total_loss(a, b, cfg, &phi).item() == total_loss(a, b, cfg).item());
    LossConfig no_per = cfg;
    no_per.lambda_per = 0;
    CHECK(total_loss(a, b, no_per).item() == l1_loss(a, b).item());
    LossConfig off = cfg;
    off.mode = PerceptualMode::off;
    CHECK(total_loss(a, b, off).item() == l1_loss(a, b).item());
    for (const auto& c : {cfg, off}) {
      CHECK(total_loss(a, a, c).item() == 0.0);
      CHECK(total_loss(a, b, c).item() > 0.0);
    }
    LossConfig bad = cfg;
    bad.lambda_per = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("total loss is non-negative over random pairs") {
    Rng rng(94);
    for (int t = 0; t < 20; ++t) {
      const auto a = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
      const auto b = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
      CHECK(total_loss(a, b, LossConfig{}).item() >= 0.0);
    }
  }

  TEST_CASE("loss gradients") {
    Rng rng(95);
    const auto a = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
    const auto b = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
    LossConfig cfg;
    cfg.lambda_per = 0.5;  // weight the perceptual term enough to be visible
    const PerceptualExtractor<double> phi(cfg.extractor_seed);
    const auto r = gradcheck([&] { return total_loss(a, b, cfg, &phi); }, {a, b}, 1e-4, 200);
    INFO(r.worst);
    CHECK(r.checked > 100);
    CHECK(r.rel_error <= 1e-5);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("psnr examples") {
    Rng rng(96);
    const auto img = random_image(20, 15, rng);
    CHECK(std::isinf(psnr(img, img)));
    CHECK(psnr(img, img) > 0);
    Image8 flat(16, 16, 100), off(16, 16, 101);
    CHECK(std::abs(psnr(flat, off) - 48.1308036) <= 1e-6);
    const auto other = random_image(20, 15, rng);
    CHECK(std::abs(psnr(img, other) - direct_psnr(img, other)) <= 1e-9);
    CHECK(psnr(img, other) == psnr(other, img));
    CHECK_THROWS_AS(psnr(img, Image8(15, 20)), DimensionError);
  }

  TEST_CASE("psnr falls as noise grows") {
    Rng rng(97);
    const auto img = synthetic_scene(48, 48, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (const int amp : {1, 2, 4, 8}) {
      const double p = psnr(img, add_noise(img, amp, 5));
      CHECK(p < prev);
      prev = p;
    }
  }

  TEST_CASE("ssim examples and direct-definition oracle") {
    Rng rng(98);
    const auto a = random_image(24, 19, rng);
    CHECK(ssim(a, a) == 1.0);
    Image8 neg = a;
    for (auto& p : neg.pixels) p = static_cast<std::uint8_t>(255 - p);
    CHECK(ssim(a, neg) < 1.0);
    for (int t = 0; t < 5; ++t) {
      const auto x = random_image(11 + rng() % 20, 11 + rng() % 20, rng);
      auto y = add_noise(x, 1 + int(rng() % 40), rng());
      const double s = ssim(x, y);
      CHECK(std::abs(s - direct_ssim(x, y)) <= 1e-9);
      CHECK(s == doctest::Approx(ssim(y, x)).epsilon(1e-12));
      CHECK(s >= -1.0);
      CHECK(s <= 1.0);
    }
    CHECK_THROWS_AS(ssim(Image8(10, 20), Image8(10, 20)), DimensionError);
  }

  TEST_CASE("report round trip and parse errors") {
    MetricsReport r;
    r.seed = 42;
    r.config_hash = 0x0123456789abcdefULL;
    r.qf_mode = "random:10:90";
    r.step = 2000;
    r.records = {{"data/low/000.png", 17, 23.4567891, 0.81234567}, {"data/low/001.png", 90, kPsnrIdentical, 1.0}};
    const auto text = format_report(r);
    CHECK(text.rfind("# hpgn metrics report v1\n", 0) == 0);
    const auto back = parse_report(text);
    CHECK(back.seed == 42);
    CHECK(back.config_hash == r.config_hash);
    CHECK(back.qf_mode == r.qf_mode);
    CHECK(back.step == 2000);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0].path == "data/low/000.png");
    CHECK(back.records[0].qf == 17);
    CHECK(std::abs(back.records[0].psnr_db - 23.4567891) <= 1e-6);
    CHECK(std::isinf(back.records[1].psnr_db));
    CHECK(format_report(back) == text);
    CHECK(std::isinf(r.mean_psnr()));
    CHECK_THROWS_AS(parse_report("garbage"), IoError);
    CHECK_THROWS_AS(parse_report(text.substr(0, text.size() / 2)), IoError);
  }
}
