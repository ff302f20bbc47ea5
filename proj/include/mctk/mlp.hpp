// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mctk/rng.hpp"
#include "mctk/tensor.hpp"

namespace mctk {

enum class Activation : std::uint8_t {
  kLinear = 0,
  /// x * sigmoid(x)
  kSilu = 1,
};

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

template <typename T>
struct DenseLayer {
  BasicTensor<T> weight;  // [out x in]
  BasicTensor<T> bias;    // [out]

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
};

template <typename T>
inline T apply_activation(Activation a, T x) {
  if (a == Activation::kLinear) return x;
  return x / (T(1) + std::exp(-x));
}

template <typename T>
inline T activation_derivative(Activation a, T x) {
  if (a == Activation::kLinear) return T(1);
  const T s = T(1) / (T(1) + std::exp(-x));
  return s * (T(1) + x * (T(1) - s));
}

/// Stack of affine layers with one activation between consecutive layers.
/// The last layer emits raw values.
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<DenseLayer<T>> layers, Activation hidden)
      : layers_(std::move(layers)), hidden_(hidden) {
    if (layers_.empty()) throw ShapeError("Mlp: at least one layer required");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.weight.rank() != 2) throw ShapeError("Mlp: layer weight must be a matrix");
      require_shape(l.bias, {l.out_dim()}, "Mlp bias");
      if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
        throw ShapeError("Mlp: layer " + std::to_string(i) + " input " + std::to_string(l.in_dim()) +
                         " does not match previous output " + std::to_string(layers_[i - 1].out_dim()));
      }
    }
  }

  /// Fan-in uniform init: weights and biases of a layer with fan-in n are drawn
  /// from U(-1/sqrt(n), 1/sqrt(n)). Values are drawn in double and rounded to T,
  /// so float and double networks built from one seed agree to float precision.
  static Mlp seeded(std::span<const std::size_t> widths, Activation hidden, std::uint64_t seed) {
    if (widths.size() < 2) throw ShapeError("Mlp::seeded: need at least input and output widths");
    Rng rng(seed);
    std::vector<DenseLayer<T>> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const std::size_t in = widths[i], out = widths[i + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      DenseLayer<T> l{BasicTensor<T>({out, in}), BasicTensor<T>({out})};
      for (auto& w : l.weight.data()) w = static_cast<T>(rng.uniform(-bound, bound));
      for (auto& b : l.bias.data()) b = static_cast<T>(rng.uniform(-bound, bound));
      layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers), hidden);
  }

  const std::vector<DenseLayer<T>>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer<T>>& layers() noexcept { return layers_; }
  Activation hidden_activation() const noexcept { return hidden_; }
  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  bool empty() const noexcept { return layers_.empty(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// All weights then bias of layer 0, then layer 1, ...
  std::vector<T> flat_parameters() const {
    std::vector<T> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers_) {
      flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
      flat.insert(flat.end(), l.bias.data().begin(), l.bias.data().end());
    }
    return flat;
  }

  void set_flat_parameters(std::span<const T> flat) {
    if (flat.size() != parameter_count()) throw ShapeError("Mlp: parameter vector length mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (auto& w : l.weight.data()) w = flat[k++];
      for (auto& b : l.bias.data()) b = flat[k++];
    }
  }

  template <typename U>
  Mlp<U> cast() const {
    std::vector<DenseLayer<U>> out;
    for (const auto& l : layers_) out.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
    return Mlp<U>(std::move(out), hidden_);
  }

 private:
  std::vector<DenseLayer<T>> layers_;
  Activation hidden_ = Activation::kSilu;
};

/// Activations recorded by a forward pass, consumed by mlp_backward.
template <typename T>
struct MlpTape {
  std::vector<BasicTensor<T>> inputs;       // per layer, [N x in]
  std::vector<BasicTensor<T>> preactivations;  // per layer, [N x out]
  bool input_was_vector = false;

  bool empty() const noexcept { return inputs.empty(); }
};

template <typename T>
struct MlpBackward {
  BasicTensor<T> grad_input;
  std::vector<DenseLayer<T>> grad_layers;
};

namespace detail {

template <typename T>
BasicTensor<T> as_batch(const BasicTensor<T>& x, std::size_t in_dim, bool& was_vector) {
  was_vector = x.rank() == 1;
  if (was_vector) {
    if (x.dim(0) != in_dim) {
      throw ShapeError("mlp: input width " + std::to_string(x.dim(0)) + " != " + std::to_string(in_dim));
    }
    return x.reshaped({1, in_dim});
  }
  if (x.rank() != 2 || x.dim(1) != in_dim) {
    throw ShapeError("mlp: expected [N x " + std::to_string(in_dim) + "], got " + shape_to_string(x.shape()));
  }
  return x;
}

}  // namespace detail

template <typename T>
BasicTensor<T> mlp_forward(const Mlp<T>& m, const BasicTensor<T>& x, MlpTape<T>* tape = nullptr) {
  if (m.empty()) throw ShapeError("mlp_forward: empty network");
  bool was_vector = false;
  BasicTensor<T> cur = detail::as_batch(x, m.in_dim(), was_vector);
  const std::size_t n = cur.dim(0);
  if (tape) {
    tape->inputs.clear();
    tape->preactivations.clear();
    tape->input_was_vector = was_vector;
  }
  const auto& layers = m.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    const std::size_t in = l.in_dim(), out = l.out_dim();
    BasicTensor<T> pre({n, out});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        T acc = l.bias[o];
        for (std::size_t i = 0; i < in; ++i) acc += l.weight[o * in + i] * cur[r * in + i];
        pre[r * out + o] = acc;
      }
    }
    const bool last = li + 1 == layers.size();
    BasicTensor<T> act = pre;
    if (!last) {
      for (auto& v : act.data()) v = apply_activation(m.hidden_activation(), v);
    }
    if (tape) {
      tape->inputs.push_back(std::move(cur));
      tape->preactivations.push_back(std::move(pre));
    }
    cur = std::move(act);
  }
  if (was_vector) return cur.reshaped({m.out_dim()});
  return cur;
}

/// Reverse-mode gradients of mlp_forward. `grad_out` matches the forward output shape.
template <typename T>
MlpBackward<T> mlp_backward(const Mlp<T>& m, const MlpTape<T>& tape, const BasicTensor<T>& grad_out) {
  const auto& layers = m.layers();
  if (tape.empty() || tape.inputs.size() != layers.size()) {
    throw ArgumentError("mlp_backward: missing or mismatched forward tape");
  }
  const std::size_t n = tape.inputs.front().dim(0);
  BasicTensor<T> g = grad_out.reshaped({n, m.out_dim()});

  MlpBackward<T> result;
  result.grad_layers.resize(layers.size());
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    const std::size_t in = l.in_dim(), out = l.out_dim();
    if (li + 1 != layers.size()) {
      const auto& pre = tape.preactivations[li];
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= activation_derivative(m.hidden_activation(), pre[k]);
    }
    const auto& xin = tape.inputs[li];
    DenseLayer<T> grad{BasicTensor<T>({out, in}), BasicTensor<T>({out})};
    BasicTensor<T> gin({n, in});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        const T go = g[r * out + o];
        grad.bias[o] += go;
        for (std::size_t i = 0; i < in; ++i) {
          grad.weight[o * in + i] += go * xin[r * in + i];
          gin[r * in + i] += l.weight[o * in + i] * go;
        }
      }
    }
    result.grad_layers[li] = std::move(grad);
    g = std::move(gin);
  }
  result.grad_input = tape.input_was_vector ? g.reshaped({m.in_dim()}) : std::move(g);
  return result;
}

/// Flattens gradients in the same order as Mlp::flat_parameters.
template <typename T>
std::vector<T> flatten_layers(const std::vector<DenseLayer<T>>& layers) {
  std::vector<T> flat;
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    flat.insert(flat.end(), l.bias.data().begin(), l.bias.data().end());
  }
  return flat;
}

}  // namespace mctk
