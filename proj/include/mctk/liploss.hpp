// SPDX-License-Identifier: Apache-2.0
#pragma once

// Mouth-region supervision: a clip-stable mouth box from ground-truth landmarks,
// the crop operator applied identically to predicted and ground-truth frames, a
// deterministic proxy lip encoder, and the cosine lip-consistency loss.

#include <cstdint>
#include <vector>

#include "mctk/shading.hpp"
#include "mctk/tensor.hpp"

namespace mctk {

inline constexpr std::size_t kLipCropSize = 224;
inline constexpr std::size_t kProxyGrid = 14;
inline constexpr std::size_t kProxyFeatureDim = kProxyGrid * kProxyGrid;
inline constexpr std::size_t kDefaultSupervisionFrames = 2;

struct LandmarkTrack {
  Tensor points;  // [T x K x 2], pixel coordinates
  std::vector<std::size_t> mouth_indices;

  std::size_t frames() const { return points.dim(0); }
  void validate() const;
};

/// Half-open pixel box [x0, x1) x [y0, y1).
struct MouthBox {
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  std::int64_t width() const { return x1 - x0; }
  std::int64_t height() const { return y1 - y0; }
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const MouthBox&) const = default;
};

/// Union of every frame's mouth-landmark extent, grown by `pad` times the union
/// width/height on each side, rounded outward (x0 = floor, x1 = floor + 1) and
/// clamped to the image.
MouthBox stable_mouth_bbox(const LandmarkTrack& track, double pad, ImageSize image);

/// Crops `box` from every frame of [T x 3 x H x W] and resizes to out x out with
/// half-pixel-centered bilinear sampling (source = (dst + 0.5) * in / out - 0.5,
/// clamped to the crop). Frames are processed in parallel.
Tensor crop_resize(const Tensor& frames, const MouthBox& box, std::size_t out = kLipCropSize, int threads = 1);

/// Serial reference for crop_resize.
Tensor crop_resize_serial(const Tensor& frames, const MouthBox& box, std::size_t out = kLipCropSize);

/// Proxy encoder: luminance, 16x16 block means onto a 14x14 grid, flattened
/// (D = 196), per-frame mean removed. Input [T x 3 x 224 x 224], output [T x 196].
Tensor proxy_lip_features(const Tensor& crops);

/// 1 - mean_t cos(f_pred[t], f_gt[t]). A zero row against a nonzero row counts
/// as cosine 0, two zero rows as cosine 1.
double lip_consistency_loss(const Tensor& f_pred, const Tensor& f_gt);

/// L_svd + L_app + L_lip.
double total_loss(double l_svd, double l_app, double l_lip);

/// t_prime distinct indices in [0, frames), uniform without replacement, ascending.
std::vector<std::size_t> sample_supervision_frames(std::size_t frames, std::size_t t_prime, std::uint64_t seed);

}  // namespace mctk
