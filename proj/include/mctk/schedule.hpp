// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mctk/mlp.hpp"
#include "mctk/tensor.hpp"

namespace mctk {

/// Discrete variance-preserving schedule. Timesteps are 1-based: t in [1, T].
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas);

  /// Linear beta ramp from beta_start to beta_end over `steps` steps.
  static NoiseSchedule linear(std::size_t steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  std::size_t steps() const noexcept { return betas_.size(); }
  double beta(std::size_t t) const;
  /// Product of (1 - beta_i) for i = 1..t.
  double alpha_bar(std::size_t t) const;

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

 private:
  void check_step(std::size_t t) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

/// sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps
template <typename T>
BasicTensor<T> forward_noise(const BasicTensor<T>& z0, std::size_t t, const BasicTensor<T>& eps,
                             const NoiseSchedule& sched) {
  if (z0.shape() != eps.shape()) {
    throw ShapeError("forward_noise: z0 " + shape_to_string(z0.shape()) + " vs eps " +
                     shape_to_string(eps.shape()));
  }
  const double ab = sched.alpha_bar(t);
  const T signal = static_cast<T>(std::sqrt(ab));
  const T noise = static_cast<T>(std::sqrt(1.0 - ab));
  BasicTensor<T> out(z0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal * z0[i] + noise * eps[i];
  return out;
}

/// Mean over all elements of (eps - eps_pred)^2, accumulated in double.
template <typename T>
double svd_loss(const BasicTensor<T>& eps, const BasicTensor<T>& eps_pred) {
  if (eps.shape() != eps_pred.shape()) {
    throw ShapeError("svd_loss: shape mismatch " + shape_to_string(eps.shape()) + " vs " +
                     shape_to_string(eps_pred.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = static_cast<double>(eps[i]) - static_cast<double>(eps_pred[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(eps.size());
}

/// [sin(t w_0), ..., sin(t w_{h-1}), cos(t w_0), ..., cos(t w_{h-1})] with
/// h = dim / 2 and w_i = 10000^(-i / h).
std::vector<double> sinusoidal_features(std::size_t t, std::size_t dim);

/// Sinusoidal timestep features followed by a linear projection to C channels.
template <typename T>
struct TimestepEmbedding {
  std::size_t dim = 0;
  Mlp<T> projection;  // single linear layer, dim -> C

  static TimestepEmbedding seeded(std::size_t dim, std::size_t channels, std::uint64_t seed) {
    if (dim < 2 || dim % 2 != 0) throw ArgumentError("TimestepEmbedding: dim must be even and >= 2");
    const std::size_t widths[] = {dim, channels};
    return {dim, Mlp<T>::seeded(widths, Activation::kLinear, seed)};
  }

  std::size_t channels() const { return projection.out_dim(); }
};

template <typename T>
BasicTensor<T> timestep_embed(std::size_t t, const TimestepEmbedding<T>& emb) {
  const auto feats = sinusoidal_features(t, emb.dim);
  BasicTensor<T> x({emb.dim});
  for (std::size_t i = 0; i < emb.dim; ++i) x[i] = static_cast<T>(feats[i]);
  return mlp_forward(emb.projection, x);
}

}  // namespace mctk
