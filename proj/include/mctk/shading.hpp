// SPDX-License-Identifier: Apache-2.0
#pragma once

// Spherical-harmonics shading and the z-buffer rasterizer that produces shading maps.
//
// SH basis order: [Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22], real and
// orthonormal on the unit sphere. A 27-value light vector is channel-major:
// light[ch * 9 + i] is coefficient i of channel ch (R, G, B).

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mctk/headmodel.hpp"
#include "mctk/tensor.hpp"

namespace mctk {

inline constexpr std::size_t kShBands = 9;

using ShBasis = std::array<double, kShBands>;

struct ShLight {
  Tensor coeffs;  // [9 x 3]

  static ShLight from_light_vector(std::span<const float> light);
};

struct ImageSize {
  std::size_t height = 512;
  std::size_t width = 512;

  bool operator==(const ImageSize&) const = default;
};

/// Rendered shading map.
struct ShadingFrame {
  Tensor pixels;  // [H x W x 3], in [0, 1]; 0 where not covered
  Tensor depth;   // [H x W], +inf where not covered
  std::vector<std::uint8_t> coverage;  // H * W, 1 = covered

  std::size_t height() const { return depth.dim(0); }
  std::size_t width() const { return depth.dim(1); }
  std::size_t covered_count() const;
};

/// Throws ArgumentError if |normal| differs from 1 by more than 1e-4.
ShBasis sh_basis(const Vec3& normal);

std::array<double, 3> sh_irradiance(const Vec3& normal, const ShLight& light);

/// Per-vertex RGB irradiance, [V x 3]. Normals are renormalized first so float
/// rounding never trips the unit-length check.
Tensor shade_vertices(const Tensor& normals, const ShLight& light);

/// Deterministic z-buffer rasterizer.
///
/// Pixel (x, y) is sampled at (x + 0.5, y + 0.5). A face is visible only when it
/// winds counter-clockwise on screen (positive signed area, y-down); faces with
/// area <= 0 are culled. A sample on an edge belongs to the face only if that
/// edge is a top or left edge. Smallest depth wins; equal depths keep the face
/// with the lower index. Color and depth are affine barycentric interpolations
/// evaluated in double; color is clamped to [0, 1].
ShadingFrame rasterize(const Tensor& xy, const Tensor& depth, std::span<const Face> faces, const Tensor& vertex_rgb,
                       ImageSize size);

/// blendshape -> apply_pose -> vertex_normals -> SH irradiance -> projection -> rasterize.
ShadingFrame render_shading(const HeadAsset& asset, const HeadParams& params, ImageSize size);

/// Frame-parallel rendering; each frame is produced by exactly one worker.
std::vector<ShadingFrame> render_frames(const HeadAsset& asset, std::span<const HeadParams> params, ImageSize size,
                                        int threads);

/// Serial reference for render_frames.
std::vector<ShadingFrame> render_frames_serial(const HeadAsset& asset, std::span<const HeadParams> params,
                                               ImageSize size);

/// 0.299 R + 0.587 G + 0.114 B per pixel, [H x W].
Tensor luminance(const ShadingFrame& frame);

}  // namespace mctk
