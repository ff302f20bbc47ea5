// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mctk/mlp.hpp"
#include "mctk/numerics.hpp"
#include "mctk/parallel.hpp"
#include "mctk/schedule.hpp"
#include "mctk/tensor.hpp"

namespace mctk {

/// Condition branches in the fixed order used for the gate MLP input and the
/// gate tensor layout.
enum class Branch : std::size_t { kReference = 0, kShading = 1, kMotion = 2, kAudio = 3 };

inline constexpr std::size_t kBranchCount = 4;
inline constexpr std::array<std::string_view, kBranchCount> kBranchNames = {"reference", "shading", "motion",
                                                                            "audio"};

/// true = branch available.
using BranchMask = std::array<bool, kBranchCount>;

inline constexpr BranchMask kAllBranches = {true, true, true, true};

/// Parses a 4-character 0/1 string in branch order, e.g. "1011".
BranchMask parse_branch_mask(std::string_view text);
std::string branch_mask_string(const BranchMask& mask);

/// Condition feature maps, each [BT x C x h x w], plus availability. Masked
/// branches may hold anything, including the null tensor; they are never read.
template <typename T>
struct ConditionSet {
  std::array<BasicTensor<T>, kBranchCount> features;
  BranchMask mask = kAllBranches;

  const BasicTensor<T>& operator[](Branch b) const { return features[static_cast<std::size_t>(b)]; }
  BasicTensor<T>& operator[](Branch b) { return features[static_cast<std::size_t>(b)]; }
  bool available(std::size_t k) const { return mask[k]; }
  bool any_available() const { return mask[0] || mask[1] || mask[2] || mask[3]; }
};

/// Gate MLP plus masking constant. The MLP maps
/// [u, t, s_reference, s_shading, s_motion, s_audio] (6C) to 4C logits laid out
/// branch-major: logit(k, c) = out[k * C + c].
template <typename T>
struct RouterConfig {
  std::size_t channels = 0;
  Mlp<T> gate_mlp;
  double mask_logit = kMaskLogit;

  /// Gate MLP with `hidden_layers` SiLU layers of width `hidden_width`
  /// (0 selects 4C).
  static RouterConfig seeded(std::size_t channels, std::uint64_t seed, std::size_t hidden_layers = 2,
                             std::size_t hidden_width = 0) {
    if (channels == 0) throw ArgumentError("RouterConfig: channels must be positive");
    const std::size_t width = hidden_width == 0 ? 4 * channels : hidden_width;
    std::vector<std::size_t> widths{6 * channels};
    for (std::size_t i = 0; i < hidden_layers; ++i) widths.push_back(width);
    widths.push_back(kBranchCount * channels);
    return {channels, Mlp<T>::seeded(widths, Activation::kSilu, seed), kMaskLogit};
  }

  void validate() const {
    if (gate_mlp.empty()) throw ShapeError("RouterConfig: gate MLP missing");
    if (gate_mlp.in_dim() != 6 * channels) {
      throw ShapeError("RouterConfig: gate MLP input width " + std::to_string(gate_mlp.in_dim()) +
                       " != 6C = " + std::to_string(6 * channels));
    }
    if (gate_mlp.out_dim() != kBranchCount * channels) {
      throw ShapeError("RouterConfig: gate MLP output width " + std::to_string(gate_mlp.out_dim()) +
                       " != 4C = " + std::to_string(kBranchCount * channels));
    }
  }

  template <typename U>
  RouterConfig<U> cast() const {
    return {channels, gate_mlp.template cast<U>(), mask_logit};
  }
};

/// gates: [BT x 4 x C]. When every branch is masked all gates are zero and
/// fully_masked is set.
template <typename T>
struct GateStack {
  BasicTensor<T> gates;
  bool fully_masked = false;

  T gate(std::size_t n, std::size_t k, std::size_t c) const {
    const std::size_t ch = gates.dim(2);
    return gates[(n * kBranchCount + k) * ch + c];
  }
};

namespace detail {

template <typename T>
void check_router_inputs(const BasicTensor<T>& h, const ConditionSet<T>& conds, const BasicTensor<T>& t_emb,
                         const RouterConfig<T>& cfg) {
  cfg.validate();
  if (h.rank() != 4 || h.dim(1) != cfg.channels) {
    throw ShapeError("router: backbone feature must be [BT x " + std::to_string(cfg.channels) +
                     " x h x w], got " + shape_to_string(h.shape()));
  }
  require_shape(t_emb, {cfg.channels}, "router timestep projection");
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    if (!conds.available(k)) continue;
    if (conds.features[k].shape() != h.shape()) {
      throw ShapeError("router: " + std::string(kBranchNames[k]) + " feature " +
                       shape_to_string(conds.features[k].shape()) + " does not match backbone " +
                       shape_to_string(h.shape()));
    }
  }
}

/// Per-channel spatial mean of sample n of a [BT x C x h x w] tensor, written to out[0..C).
template <typename T>
void pool_sample(const BasicTensor<T>& x, std::size_t n, T* out) {
  const std::size_t ch = x.dim(1), area = x.dim(2) * x.dim(3);
  const T* base = x.data().data() + n * ch * area;
  for (std::size_t c = 0; c < ch; ++c) {
    T acc{};
    for (std::size_t p = 0; p < area; ++p) acc += base[c * area + p];
    out[c] = acc / static_cast<T>(area);
  }
}

/// Gate MLP input row for sample n; masked summaries are zero.
template <typename T>
void gate_input_row(const BasicTensor<T>& h, const ConditionSet<T>& conds, const BasicTensor<T>& t_emb,
                    std::size_t n, T* row) {
  const std::size_t ch = h.dim(1);
  pool_sample(h, n, row);
  for (std::size_t c = 0; c < ch; ++c) row[ch + c] = t_emb[c];
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    T* slot = row + (2 + k) * ch;
    if (conds.available(k)) {
      pool_sample(conds.features[k], n, slot);
    } else {
      for (std::size_t c = 0; c < ch; ++c) slot[c] = T{};
    }
  }
}

/// Overwrites masked logits and normalizes over branches; logits are [N x 4C].
template <typename T>
BasicTensor<T> normalize_gates(BasicTensor<T> logits, const BranchMask& mask, const RouterConfig<T>& cfg) {
  const std::size_t n = logits.dim(0), ch = cfg.channels;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < kBranchCount; ++k) {
      if (mask[k]) continue;
      for (std::size_t c = 0; c < ch; ++c) logits[r * kBranchCount * ch + k * ch + c] = static_cast<T>(cfg.mask_logit);
    }
  }
  return softmax(logits.reshaped({n, kBranchCount, ch}), 1, cfg.mask_logit).values;
}

/// Batched gate computation, one MLP call over all BT rows.
template <typename T>
GateStack<T> route_batch(const BasicTensor<T>& h, const ConditionSet<T>& conds, const BasicTensor<T>& t_emb,
                         const RouterConfig<T>& cfg, BasicTensor<T>* gate_input, MlpTape<T>* tape) {
  check_router_inputs(h, conds, t_emb, cfg);
  const std::size_t bt = h.dim(0), ch = cfg.channels;
  BasicTensor<T> rows({bt, 6 * ch});
  for (std::size_t n = 0; n < bt; ++n) gate_input_row(h, conds, t_emb, n, rows.data().data() + n * 6 * ch);
  BasicTensor<T> logits = mlp_forward(cfg.gate_mlp, rows, tape);
  if (gate_input) *gate_input = rows;
  GateStack<T> out;
  out.fully_masked = !conds.any_available();
  out.gates = normalize_gates(std::move(logits), conds.mask, cfg);
  return out;
}

}  // namespace detail

/// Serial reference: pools, runs the gate MLP on all BT rows at once, masks, and normalizes.
template <typename T>
GateStack<T> route_gates_serial(const BasicTensor<T>& h, const ConditionSet<T>& conds, const BasicTensor<T>& t_emb,
                                const RouterConfig<T>& cfg) {
  return detail::route_batch<T>(h, conds, t_emb, cfg, nullptr, nullptr);
}

/// Per-channel gates over the four branches, computed sample-parallel over BT.
template <typename T>
GateStack<T> route_gates(const BasicTensor<T>& h, const ConditionSet<T>& conds, const BasicTensor<T>& t_emb,
                         const RouterConfig<T>& cfg, int threads = 1) {
  detail::check_router_inputs(h, conds, t_emb, cfg);
  const std::size_t bt = h.dim(0), ch = cfg.channels;
  GateStack<T> out{BasicTensor<T>({bt, kBranchCount, ch}), !conds.any_available()};
  parallel_for(bt, threads, [&](std::size_t n) {
    BasicTensor<T> row({6 * ch});
    detail::gate_input_row(h, conds, t_emb, n, row.data().data());
    BasicTensor<T> logits = mlp_forward(cfg.gate_mlp, row).reshaped({1, kBranchCount * ch});
    const BasicTensor<T> g = detail::normalize_gates(std::move(logits), conds.mask, cfg);
    std::copy(g.data().begin(), g.data().end(), out.gates.data().begin() + n * kBranchCount * ch);
  });
  return out;
}

/// h + sum over available branches of g_k (broadcast over h x w) * F_k.
template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& h, const ConditionSet<T>& conds, const GateStack<T>& gates,
                    int threads = 1) {
  if (h.rank() != 4) throw ShapeError("fuse: backbone feature must be rank 4, got " + shape_to_string(h.shape()));
  const std::size_t bt = h.dim(0), ch = h.dim(1), area = h.dim(2) * h.dim(3);
  require_shape(gates.gates, {bt, kBranchCount, ch}, "fuse gates");
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    if (conds.available(k) && conds.features[k].shape() != h.shape()) {
      throw ShapeError("fuse: " + std::string(kBranchNames[k]) + " feature shape " +
                       shape_to_string(conds.features[k].shape()) + " != " + shape_to_string(h.shape()));
    }
  }
  BasicTensor<T> out = h;
  if (gates.fully_masked) return out;
  parallel_for(bt, threads, [&](std::size_t n) {
    for (std::size_t k = 0; k < kBranchCount; ++k) {
      if (!conds.available(k)) continue;
      const auto& f = conds.features[k];
      for (std::size_t c = 0; c < ch; ++c) {
        const T g = gates.gate(n, k, c);
        const std::size_t base = (n * ch + c) * area;
        for (std::size_t p = 0; p < area; ++p) out[base + p] += g * f[base + p];
      }
    }
  });
  return out;
}

/// Everything router_backward needs from a forward pass.
template <typename T>
struct RouterTape {
  BasicTensor<T> h;
  ConditionSet<T> conds;
  BasicTensor<T> t_emb;
  BasicTensor<T> gate_input;  // [BT x 6C]
  MlpTape<T> mlp_tape;
  GateStack<T> gates;

  bool valid() const { return !h.is_null() && !mlp_tape.empty(); }
};

template <typename T>
struct RouterOutput {
  BasicTensor<T> fused;
  GateStack<T> gates;
  RouterTape<T> tape;
};

template <typename T>
struct RouterGrads {
  BasicTensor<T> grad_h;
  std::array<BasicTensor<T>, kBranchCount> grad_features;
  std::vector<DenseLayer<T>> grad_gate_mlp;
  BasicTensor<T> grad_t_emb;  // [C], summed over BT
};

/// Gates from (h, conditions, projected timestep embedding) followed by residual fusion.
template <typename T>
RouterOutput<T> router_forward(const BasicTensor<T>& h, const ConditionSet<T>& conds, const BasicTensor<T>& t_emb,
                               const RouterConfig<T>& cfg) {
  RouterOutput<T> out;
  out.gates = detail::route_batch(h, conds, t_emb, cfg, &out.tape.gate_input, &out.tape.mlp_tape);
  out.fused = fuse(h, conds, out.gates);
  out.tape.h = h;
  out.tape.conds = conds;
  out.tape.t_emb = t_emb;
  out.tape.gates = out.gates;
  return out;
}

/// Overload taking a diffusion timestep, routed through timestep_embed.
template <typename T>
RouterOutput<T> router_forward(const BasicTensor<T>& h, const ConditionSet<T>& conds, std::size_t timestep,
                               const TimestepEmbedding<T>& emb, const RouterConfig<T>& cfg) {
  if (emb.channels() != cfg.channels) {
    throw ShapeError("router_forward: timestep projection width " + std::to_string(emb.channels()) +
                     " != C = " + std::to_string(cfg.channels));
  }
  return router_forward(h, conds, timestep_embed(timestep, emb), cfg);
}

template <typename T>
RouterGrads<T> router_backward(const RouterConfig<T>& cfg, const RouterTape<T>& tape, const BasicTensor<T>& grad_fused) {
  if (!tape.valid()) throw ArgumentError("router_backward: tape is empty or stale");
  require_shape(grad_fused, tape.h.shape(), "router_backward grad");
  if (tape.gate_input.dim(1) != 6 * cfg.channels || tape.mlp_tape.inputs.size() != cfg.gate_mlp.layers().size()) {
    throw ArgumentError("router_backward: tape was produced by a different router config");
  }
  const std::size_t bt = tape.h.dim(0), ch = tape.h.dim(1), area = tape.h.dim(2) * tape.h.dim(3);
  const T inv_area = T(1) / static_cast<T>(area);
  const auto& conds = tape.conds;
  const auto& gates = tape.gates;

  RouterGrads<T> r;
  r.grad_h = grad_fused;
  for (auto& g : r.grad_features) g = BasicTensor<T>(tape.h.shape());
  r.grad_t_emb = BasicTensor<T>({ch});

  BasicTensor<T> grad_logits({bt, kBranchCount * ch});
  if (!gates.fully_masked) {
    for (std::size_t n = 0; n < bt; ++n) {
      for (std::size_t c = 0; c < ch; ++c) {
        std::array<T, kBranchCount> dg{};
        T weighted{};
        for (std::size_t k = 0; k < kBranchCount; ++k) {
          if (!conds.available(k)) continue;
          const auto& f = conds.features[k];
          const T g = gates.gate(n, k, c);
          const std::size_t base = (n * ch + c) * area;
          T acc{};
          for (std::size_t p = 0; p < area; ++p) {
            acc += grad_fused[base + p] * f[base + p];
            r.grad_features[k][base + p] = g * grad_fused[base + p];
          }
          dg[k] = acc;
          weighted += g * acc;
        }
        for (std::size_t k = 0; k < kBranchCount; ++k) {
          if (!conds.available(k)) continue;
          grad_logits[n * kBranchCount * ch + k * ch + c] = gates.gate(n, k, c) * (dg[k] - weighted);
        }
      }
    }
  }

  MlpBackward<T> mb = mlp_backward(cfg.gate_mlp, tape.mlp_tape, grad_logits);
  const auto& gin = mb.grad_input;
  for (std::size_t n = 0; n < bt; ++n) {
    const T* row = gin.data().data() + n * 6 * ch;
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (n * ch + c) * area;
      const T du = row[c] * inv_area;
      for (std::size_t p = 0; p < area; ++p) r.grad_h[base + p] += du;
      r.grad_t_emb[c] += row[ch + c];
      for (std::size_t k = 0; k < kBranchCount; ++k) {
        if (!conds.available(k)) continue;
        const T ds = row[(2 + k) * ch + c] * inv_area;
        for (std::size_t p = 0; p < area; ++p) r.grad_features[k][base + p] += ds;
      }
    }
  }
  r.grad_gate_mlp = std::move(mb.grad_layers);
  return r;
}

}  // namespace mctk
