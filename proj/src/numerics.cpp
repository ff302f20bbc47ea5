// SPDX-License-Identifier: Apache-2.0
#include "mctk/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "mctk/mlp.hpp"

namespace mctk {

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

double fd_check(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                const Tensor64& analytic, double step) {
  if (analytic.shape() != x.shape()) {
    throw ShapeError("fd_check: gradient shape " + shape_to_string(analytic.shape()) +
                     " does not match input " + shape_to_string(x.shape()));
  }
  if (!(step > 0.0)) throw ArgumentError("fd_check: step must be positive");
  Tensor64 probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double plus = f(probe);
    probe[i] = x[i] - step;
    const double minus = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("fd_check: non-finite function value at coordinate " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * step);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear:
      return "linear";
    case Activation::kSilu:
      return "silu";
  }
  return "unknown";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "silu") return Activation::kSilu;
  throw ArgumentError("unknown activation '" + name + "'");
}

}  // namespace mctk
