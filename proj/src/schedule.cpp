// SPDX-License-Identifier: Apache-2.0
#include "mctk/schedule.hpp"

#include <string>

namespace mctk {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw ArgumentError("NoiseSchedule: empty beta list");
  alpha_bar_.reserve(betas_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw ArgumentError("NoiseSchedule: beta[" + std::to_string(i + 1) + "] = " + std::to_string(b) +
                          " outside (0, 1)");
    }
    running *= 1.0 - b;
    alpha_bar_.push_back(running);
  }
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw ArgumentError("NoiseSchedule::linear: steps must be positive");
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

void NoiseSchedule::check_step(std::size_t t) const {
  if (t < 1 || t > betas_.size()) {
    throw ArgumentError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(betas_.size()) + "]");
  }
}

double NoiseSchedule::beta(std::size_t t) const {
  check_step(t);
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
  check_step(t);
  return alpha_bar_[t - 1];
}

std::vector<double> sinusoidal_features(std::size_t t, std::size_t dim) {
  if (dim < 2 || dim % 2 != 0) throw ArgumentError("sinusoidal_features: dim must be even and >= 2");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  const double log_base = std::log(10000.0);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-log_base * static_cast<double>(i) / static_cast<double>(half));
    const double angle = static_cast<double>(t) * freq;
    out[i] = std::sin(angle);
    out[half + i] = std::cos(angle);
  }
  return out;
}

}  // namespace mctk
