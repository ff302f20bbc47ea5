// SPDX-License-Identifier: Apache-2.0
#pragma once

// Linear-blendshape head model with a single jaw joint.
//
// Conventions:
//  - right-handed world frame, camera on +z looking toward -z, image y-down;
//  - axis-angle vectors are radians; the jaw vector is (pitch, yaw, roll) about (x, y, z);
//  - faces wind counter-clockwise when seen from outside the mesh.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mctk/tensor.hpp"

namespace mctk {

inline constexpr std::size_t kShapeDim = 100;
inline constexpr std::size_t kExpressionDim = 50;
inline constexpr std::size_t kLightDim = 27;

using Vec3 = std::array<double, 3>;
/// Row-major 3x3.
using Mat3 = std::array<double, 9>;
using Face = std::array<std::uint32_t, 3>;

struct HeadAsset {
  Tensor template_vertices;  // [V x 3]
  std::vector<Face> faces;
  Tensor shape_basis;       // [V x 3 x 100]
  Tensor expression_basis;  // [V x 3 x 50]
  Tensor jaw_weights;       // [V], in [0, 1]
  Tensor jaw_pivot;         // [3]

  std::size_t vertex_count() const { return template_vertices.is_null() ? 0 : template_vertices.dim(0); }

  /// Throws ShapeError / NumericError when an asset invariant does not hold.
  void validate() const;
};

/// Weak-perspective camera: x_ndc = scale * x + tx, y_ndc = scale * y + ty.
struct Camera {
  float scale = 1.0f;
  float tx = 0.0f;
  float ty = 0.0f;

  bool operator==(const Camera&) const = default;
};

/// Per-frame head state.
struct HeadParams {
  std::array<float, kShapeDim> shape{};
  std::array<float, kExpressionDim> expression{};
  std::array<float, 3> jaw{};
  std::array<float, 3> head_rotation{};
  Camera camera;
  std::array<float, kLightDim> light{};

  bool operator==(const HeadParams&) const = default;

  /// Throws unless scale > 0 and every entry is finite.
  void validate() const;
};

/// template + shape_basis . s + expression_basis . e, accumulated in double.
Tensor blendshape(const HeadAsset& asset, std::span<const float> shape, std::span<const float> expression);

/// Rodrigues' formula. r = 0 yields the exact identity.
Mat3 axis_angle_to_matrix(const Vec3& r);
Tensor axis_angle_to_matrix(const Tensor& r);

Vec3 mat_vec(const Mat3& m, const Vec3& v);
Mat3 mat_mul(const Mat3& a, const Mat3& b);

/// Jaw rotation about the pivot blended per vertex by jaw_weights, then global
/// head rotation about the origin:
///   v <- v + w (R_jaw (v - p) - (v - p)),   v <- R_head v
/// Linear blending of the rotation's action; accurate for jaw angles below ~30 degrees.
Tensor apply_pose(const Tensor& vertices, const HeadAsset& asset, std::span<const float, 3> head_rotation,
                  std::span<const float, 3> jaw);

struct Projection {
  Tensor xy;     // [V x 2] pixel coordinates
  Tensor depth;  // [V], -z; larger is farther
};

/// x_img = (s x + tx + 1) W / 2,  y_img = (1 - (s y + ty)) H / 2,  depth = -z.
Projection project_weak_perspective(const Tensor& vertices, const Camera& camera, std::size_t height,
                                    std::size_t width);

/// Area-weighted accumulation of face normals, normalized. Vertices whose
/// accumulated normal vanishes get +z.
Tensor vertex_normals(const Tensor& vertices, std::span<const Face> faces);

/// Synthetic stand-in asset: unit icosphere with `subdivisions` Loop-style
/// midpoint splits (V = 10 * 4^n + 2), smooth seeded displacement bases bounded
/// by 0.1 per unit coefficient, and jaw weights that ramp with smoothstep over
/// the lower third of the sphere (y < -1/3). The jaw pivot is the centroid of
/// the weighted vertices.
HeadAsset gen_desk_asset(std::uint64_t seed, int subdivisions);

}  // namespace mctk
