// SPDX-License-Identifier: Apache-2.0
#pragma once

// Four-source parameter fusion: identity and lighting from reference fits,
// head rotation from one stream, mouth (expression + jaw) from another.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mctk/headmodel.hpp"
#include "mctk/shading.hpp"

namespace mctk {

/// One tracked frame: base expression/jaw plus residual corrections, and head rotation.
struct StreamFrame {
  std::array<float, kExpressionDim> exp_spectre{};
  std::array<float, kExpressionDim> exp_deca_residual{};
  std::array<float, 3> jaw_spectre{};
  std::array<float, 3> jaw_deca_residual{};
  std::array<float, 3> head_rot{};

  bool operator==(const StreamFrame&) const = default;
};

/// Parameters fitted from one source video. Identity and lighting are stream
/// level: they come from single reference frames.
struct ParamStream {
  double fps = 25.0;
  std::array<float, kShapeDim> shape{};
  Camera camera;
  std::array<float, kLightDim> light{};
  std::vector<StreamFrame> frames;

  /// fps > 0, frames nonempty, everything finite.
  void validate() const;
};

/// Which loaded stream supplies each attribute. Duplicates are allowed.
struct Recipe {
  std::string identity;
  std::string lighting;
  std::string head;
  std::string mouth;
  std::optional<std::size_t> frame_count;

  static Recipe self(const std::string& name) { return {name, name, name, name, std::nullopt}; }
};

using StreamMap = std::map<std::string, ParamStream>;

std::array<float, kExpressionDim> fuse_expression(std::span<const float> exp_spectre,
                                                  std::span<const float> exp_deca_residual);
std::array<float, 3> fuse_jaw(std::span<const float> jaw_spectre, std::span<const float> jaw_deca_residual);
/// [r_head, jaw]
std::array<float, 6> assemble_pose(std::span<const float> head_rotation, std::span<const float> jaw);

/// Fused parameters of frame t of a single stream.
HeadParams fuse_frame(const ParamStream& identity, const ParamStream& lighting, const StreamFrame& head,
                      const StreamFrame& mouth);

/// Frame count is recipe.frame_count when set, otherwise the shorter of the head
/// and mouth streams. Head and mouth must share fps; no resampling is done.
std::vector<HeadParams> recombine(const StreamMap& streams, const Recipe& recipe);

std::vector<ShadingFrame> fuse_and_render(const StreamMap& streams, const Recipe& recipe, const HeadAsset& asset,
                                          ImageSize size, int threads = 1);

}  // namespace mctk
