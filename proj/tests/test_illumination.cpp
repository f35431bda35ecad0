#include <doctest.h>

#include <cmath>

#include "hpgn/errors.hpp"
#include "hpgn/illumination.hpp"
#include "test_common.hpp"

using namespace hpgn;
using namespace hpgn::testing;

TEST_SUITE("illumination") {
  TEST_CASE("prior of a single pixel is its channel mean") {
    const auto x = Tensor<double>::from(Shape{1, 3, 1, 1}, {0.2, 0.4, 0.6});
    CHECK(illum_prior(x).map.item() == doctest::Approx(0.4).epsilon(1e-15));
    const auto black = illum_prior(Tensor<double>::zeros(Shape{2, 3, 4, 4}));
    for (const double v : black.map.data()) CHECK(v == 0.0);
  }

  TEST_CASE("prior matches a per-pixel loop exactly and stays in [0, 1]") {
    Rng rng(40);
    const auto x = random_tensor(Shape{2, 3, 7, 5}, rng, 0, 1);
    const auto p = illum_prior(x).map;
    CHECK(p.shape() == Shape{2, 1, 7, 5});
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t i = 0; i < 35; ++i) {
        const double expect = (x.at((s * 3 + 0) * 35 + i) + x.at((s * 3 + 1) * 35 + i) + x.at((s * 3 + 2) * 35 + i)) / 3.0;
        CHECK(p.at(s * 35 + i) == expect);
        CHECK(p.at(s * 35 + i) >= 0.0);
        CHECK(p.at(s * 35 + i) <= 1.0);
      }
  }

  TEST_CASE("prior rejects non-RGB input") {
    CHECK_THROWS_AS(illum_prior(Tensor<double>::zeros(Shape{1, 4, 3, 3})), DimensionError);
    CHECK_THROWS_AS(illum_prior(Tensor<double>::zeros(Shape{3, 3, 3})), DimensionError);
  }

  TEST_CASE("estimator output shapes and positivity") {
    Rng rng(41);
    const auto est = IlluminationEstimator<double>::create(8, rng);
    for (const auto& shape : {Shape{1, 3, 5, 9}, Shape{2, 3, 12, 8}, Shape{3, 3, 1, 1}}) {
      const auto x = random_tensor(shape, rng, 0, 1);
      const auto out = estimate(x, illum_prior(x), est);
      CHECK(out.brightness.shape() == shape);
      CHECK(out.features.shape() == Shape{shape[0], 8, shape[2], shape[3]});
      for (const double v : out.brightness.data()) CHECK(v > 0.0);
    }
  }

  TEST_CASE("zeroed brightness head yields softplus(0) = ln 2") {
    Rng rng(42);
    auto est = IlluminationEstimator<double>::create(6, rng);
    est.to_brightness.zero();
    const auto x = random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    const auto out = estimate(x, illum_prior(x), est);
    for (const double v : out.brightness.data()) CHECK(std::abs(v - std::log(2.0)) <= 1e-15);
  }

  TEST_CASE("estimate rejects inconsistent prior") {
    Rng rng(43);
    const auto est = IlluminationEstimator<double>::create(4, rng);
    const auto x = random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    IlluminationPriorMap<double> bad{Tensor<double>::zeros(Shape{1, 1, 5, 6})};
    CHECK_THROWS_AS(estimate(x, bad, est), DimensionError);
  }

  TEST_CASE("estimator is translation-equivariant away from borders") {
    Rng rng(44);
    const auto est = IlluminationEstimator<double>::create(4, rng);
    const std::size_t h = 20, w = 20, shift = 3;
    const auto x = random_tensor(Shape{1, 3, h, w}, rng, 0, 1);
    const auto shifted = ops::narrow(ops::narrow(x, 2, shift, h - shift), 3, shift, w - shift);
    const auto full = estimate(x, illum_prior(x), est);
    const auto part = estimate(shifted, illum_prior(shifted), est);
    const std::size_t border = 2;  // depthwise 5x5 reach
    const std::size_t hs = h - shift, ws = w - shift;
    for (const auto* pair : {&full.brightness, &full.features}) {
      const auto& a = *pair;
      const auto& b = pair == &full.brightness ? part.brightness : part.features;
      for (std::size_t c = 0; c < a.dim(1); ++c)
        for (std::size_t y = border; y + border < hs; ++y)
          for (std::size_t xx = border; xx + border < ws; ++xx)
            CHECK(std::abs(a.at((c * h + y + shift) * w + xx + shift) - b.at((c * hs + y) * ws + xx)) <= 1e-12);
    }
  }

  TEST_CASE("light_up") {
    Rng rng(45);
    const auto x = random_tensor(Shape{2, 3, 4, 5}, rng, 0, 1);
    const auto ones = light_up(Tensor<double>::ones(x.shape()), x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(ones.at(i) == x.at(i));
    const auto b = random_tensor(x.shape(), rng, 0, 3);
    const auto zero = light_up(b, Tensor<double>::zeros(x.shape()));
    for (const double v : zero.data()) CHECK(v == 0.0);
    const auto prod = light_up(b, x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(prod.at(i) == b.at(i) * x.at(i));
    CHECK_THROWS_AS(light_up(Tensor<double>::ones(Shape{2, 3, 4, 4}), x), DimensionError);
    CHECK_THROWS_AS(light_up(Tensor<double>::ones(Shape{2, 3, 1, 1}), x), DimensionError);
  }

  TEST_CASE("gradient of mean brightness and features w.r.t. estimator weights") {
    Rng rng(46);
    const auto est = IlluminationEstimator<double>::create(4, rng);
    const auto x = random_tensor(Shape{2, 3, 7, 6}, rng, 0, 1);
    ParamSet<double> set;
    est.collect(set, "estimator");
    std::vector<Tensor<double>> inputs;
    for (const auto& e : set.entries()) inputs.push_back(e.tensor);
    inputs.push_back(x);
    const auto weights = random_tensor(Shape{2, 4, 7, 6}, rng);
    const auto r = gradcheck(
        [&] {
          const auto out = estimate(x, illum_prior(x), est);
          return ops::add(ops::mean(out.brightness), ops::mean(ops::mul(out.features, weights)));
        },
        inputs);
    INFO(r.worst);
    CHECK(r.checked > 0);
    CHECK(r.rel_error <= 1e-5);
  }
}
