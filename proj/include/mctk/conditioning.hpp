// SPDX-License-Identifier: Apache-2.0
#pragma once

// Condition featurizers: audio windows, keypoint maps, and the seeded affine
// adapters that lift each modality to a [C x h x w] latent aligned with the
// backbone feature.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mctk/router.hpp"
#include "mctk/shading.hpp"
#include "mctk/tensor.hpp"

namespace mctk {

/// Per-frame speech-encoder tokens, [T x L x C_a].
struct AudioTrack {
  Tensor features;
};

/// windows[t] = [a_{t-m}, ..., a_{t+m}], indices clamped to [0, T), [T x W x L x C_a].
struct AudioWindows {
  Tensor windows;
  std::size_t half_width = 0;

  std::size_t window_length() const { return 2 * half_width + 1; }
};

AudioWindows build_audio_windows(const AudioTrack& track, std::size_t half_width);

/// Affine map from a flattened audio window to a C x h x w latent.
struct AudioAdapter {
  std::size_t channels = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  Tensor weight;  // [(C h w) x in]
  Tensor bias;    // [C h w]

  /// Fan-in uniform weights, zero bias.
  static AudioAdapter seeded(std::size_t in_width, std::size_t channels, std::size_t grid_h, std::size_t grid_w,
                             std::uint64_t seed);
  std::size_t in_width() const { return weight.dim(1); }
};

/// [T x C x h x w]; frames are processed in parallel.
Tensor audio_to_spatial(const AudioWindows& windows, const AudioAdapter& adapter, int threads = 1);

/// Non-overlapping patch projection shared across all patch positions.
struct PatchAdapter {
  std::size_t patch = 8;
  std::size_t in_channels = 0;
  std::size_t channels = 0;
  Tensor weight;  // [C x (C_in p p)], input flattened as (c_in, dy, dx)
  Tensor bias;    // [C]

  static PatchAdapter seeded(std::size_t in_channels, std::size_t channels, std::size_t patch, std::uint64_t seed);
};

/// [C_in x H x W] -> [C x H/p x W/p]; patch (i, j) lands in latent cell (i, j).
Tensor patch_embed(const Tensor& image, const PatchAdapter& adapter);

/// [T x C_in x H x W] -> [T x C x H/p x W/p], frame-parallel.
Tensor patch_embed_frames(const Tensor& frames, const PatchAdapter& adapter, int threads = 1);

using Keypoint = std::array<float, 2>;

/// Gaussian splats of peak 1 at each keypoint (pixel coordinates, pixel centers
/// at +0.5), summed and clamped to [0, 1]. Splats are truncated at 6 sigma.
/// Returns [1 x H x W].
Tensor rasterize_keypoints(std::span<const Keypoint> keypoints, ImageSize size, double sigma);

/// Per-branch latents for one clip. The reference is a single [C x h x w]
/// latent broadcast over frames; the others are [T x C x h x w]. Missing inputs
/// and branches cleared in `dropout` are masked.
struct ConditionInputs {
  std::optional<Tensor> reference;
  std::optional<Tensor> shading;
  std::optional<Tensor> motion;
  std::optional<Tensor> audio;
  BranchMask dropout = kAllBranches;
  /// Needed only when no per-frame branch is given.
  std::optional<std::size_t> frames;
};

/// One ConditionSet per frame, each with features shaped [1 x C x h x w].
std::vector<ConditionSet<float>> make_condition_sets(const ConditionInputs& inputs);

}  // namespace mctk
