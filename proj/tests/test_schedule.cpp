// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "mctk/schedule.hpp"
#include "support.hpp"

using namespace mctk;

TEST_SUITE("schedule") {

TEST_CASE("linear betas hit both endpoints") {
  const auto s = NoiseSchedule::linear();
  CHECK(s.steps() == 1000);
  CHECK(s.beta(1) == 1e-4);
  CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK_THROWS_AS(s.beta(0), ArgumentError);
  CHECK_THROWS_AS(s.alpha_bar(1001), ArgumentError);
}

TEST_CASE("alpha_bar is the running product of 1 - beta") {
  const auto s = NoiseSchedule::linear();
  long double prod = 1.0L;
  for (std::size_t t = 1; t <= s.steps(); ++t) {
    prod *= 1.0L - static_cast<long double>(s.beta(t));
    CHECK(s.alpha_bar(t) == doctest::Approx(static_cast<double>(prod)).epsilon(1e-12));
  }
  CHECK(s.alpha_bar(1) == 1.0 - 1e-4);
}

TEST_CASE("alpha_bar is strictly decreasing and variance preserving") {
  const auto s = NoiseSchedule::linear();
  for (std::size_t t = 1; t <= s.steps(); ++t) {
    const double ab = s.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    CHECK(std::abs(a * a + b * b - 1.0) < 1e-7);
    if (t > 1) CHECK(ab < s.alpha_bar(t - 1));
  }
}

TEST_CASE("schedule rejects betas outside (0, 1)") {
  CHECK_THROWS_AS(NoiseSchedule({0.1, 1.0}), ArgumentError);
  CHECK_THROWS_AS(NoiseSchedule({0.0}), ArgumentError);
  CHECK_THROWS_AS(NoiseSchedule({}), ArgumentError);
}

TEST_CASE("forward_noise mixes signal and noise by the schedule") {
  const auto s = NoiseSchedule::linear();
  Rng rng(1);
  const Tensor64 z0 = testing::random_tensor<double>({2, 3}, rng);
  const Tensor64 eps = testing::random_tensor<double>({2, 3}, rng);
  const std::size_t t = 500;
  const Tensor64 zt = forward_noise(z0, t, eps, s);
  const double ab = s.alpha_bar(t);
  for (std::size_t i = 0; i < zt.size(); ++i) {
    CHECK(zt[i] == doctest::Approx(std::sqrt(ab) * z0[i] + std::sqrt(1.0 - ab) * eps[i]).epsilon(1e-15));
  }
  const Tensor64 zero_signal = forward_noise(Tensor64({2, 3}), t, eps, s);
  CHECK(zero_signal[0] == std::sqrt(1.0 - ab) * eps[0]);
  CHECK_THROWS_AS(forward_noise(z0, t, Tensor64({3, 2}), s), ShapeError);
}

TEST_CASE("svd_loss hand cases") {
  CHECK(svd_loss(Tensor({2}, {1, 2}), Tensor({2}, {0, 0})) == 2.5);
  CHECK(svd_loss(Tensor({3}, {1, -1, 4}), Tensor({3}, {1, -1, 4})) == 0.0);
  CHECK(svd_loss(Tensor({1}, {3}), Tensor({1}, {1})) == 4.0);
  CHECK_THROWS_AS(svd_loss(Tensor({2}), Tensor({3})), ShapeError);
}

TEST_CASE("sinusoidal features layout") {
  const auto f0 = sinusoidal_features(0, 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f0[i] == 0.0);
    CHECK(f0[4 + i] == 1.0);
  }
  const auto f = sinusoidal_features(7, 8);
  const double w1 = std::pow(10000.0, -1.0 / 4.0);
  CHECK(f[0] == doctest::Approx(std::sin(7.0)));
  CHECK(f[1] == doctest::Approx(std::sin(7.0 * w1)).epsilon(1e-13));
  CHECK(f[5] == doctest::Approx(std::cos(7.0 * w1)).epsilon(1e-13));
  CHECK_THROWS_AS(sinusoidal_features(1, 7), ArgumentError);
}

TEST_CASE("timestep embedding is a linear map of the sinusoidal features") {
  const auto emb = TimestepEmbedding<double>::seeded(16, 3, 9);
  CHECK(emb.channels() == 3);
  const Tensor64 e = timestep_embed(123, emb);
  const auto feats = sinusoidal_features(123, 16);
  const auto& l = emb.projection.layers()[0];
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = l.bias[c];
    for (std::size_t i = 0; i < 16; ++i) acc += l.weight(c, i) * feats[i];
    CHECK(e[c] == doctest::Approx(acc).epsilon(1e-14));
  }
  CHECK_FALSE(timestep_embed(1, emb).bit_equal(timestep_embed(2, emb)));
}

}
