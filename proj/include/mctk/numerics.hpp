// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "mctk/tensor.hpp"

namespace mctk {

/// Logit value that marks an entry as dropped. Exactly representable in float.
inline constexpr double kMaskLogit = -1e9;

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
BasicTensor<T> scaled(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

/// Row-major [M x K] * [K x N]. The K sum runs left to right.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  }
  return out;
}

template <typename T>
struct SoftmaxResult {
  BasicTensor<T> values;
  /// Number of slices whose entries were all at or below the mask value. Those
  /// slices are returned as zeros.
  std::size_t masked_slices = 0;

  bool fully_masked() const noexcept { return masked_slices > 0; }
};

/// Max-subtracted softmax along `axis`. Entries <= mask_value count as dropped:
/// a slice with no surviving entry becomes all zeros instead of NaN.
template <typename T>
SoftmaxResult<T> softmax(const BasicTensor<T>& x, std::size_t axis, double mask_value = kMaskLogit) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_to_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  const std::size_t len = x.dim(axis);
  const T mask = static_cast<T>(mask_value);

  SoftmaxResult<T> r{BasicTensor<T>(x.shape()), 0};
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      bool any_alive = false;
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < len; ++i) {
        const T v = x[base + i * inner];
        if (v > mask) any_alive = true;
        if (v > peak) peak = v;
      }
      if (!any_alive) {
        ++r.masked_slices;
        continue;
      }
      T total{};
      for (std::size_t i = 0; i < len; ++i) {
        const T e = std::exp(x[base + i * inner] - peak);
        r.values[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) r.values[base + i * inner] /= total;
    }
  }
  return r;
}

/// Global average pooling over the last two (spatial) axes: [... x C x H x W] -> [... x C].
template <typename T>
BasicTensor<T> gap(const BasicTensor<T>& x) {
  if (x.rank() < 3) {
    throw ShapeError("gap: expected [... x C x H x W], got " + shape_to_string(x.shape()));
  }
  const std::size_t area = x.dim(x.rank() - 2) * x.dim(x.rank() - 1);
  Shape out_shape(x.shape().begin(), x.shape().end() - 2);
  BasicTensor<T> out(out_shape);
  for (std::size_t c = 0; c < out.size(); ++c) {
    T acc{};
    for (std::size_t p = 0; p < area; ++p) acc += x[c * area + p];
    out[c] = acc / static_cast<T>(area);
  }
  return out;
}

/// Maximum relative error between `analytic` and the central difference
/// (f(x + step e_i) - f(x - step e_i)) / (2 step) over every coordinate i.
/// Relative error per coordinate is |a - b| / max(|a|, |b|, 1e-8).
/// Throws NumericError naming the coordinate if f is non-finite there.
double fd_check(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                const Tensor64& analytic, double step);

/// Per-coordinate relative error used by fd_check.
double relative_error(double a, double b);

}  // namespace mctk
