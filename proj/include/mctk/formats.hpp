// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON documents and on-disk layouts built on the tensor container.
//
// ParamStream:  {fps, identity: {shape[100], camera[3]}, lighting: {sh[27]},
//                frames: [{exp_spectre[50], exp_deca_residual[50], jaw_spectre[3],
//                          jaw_deca_residual[3], head_rot[3]}, ...]}
// Recipe:       {identity, lighting, head, mouth, frame_count?}
// Landmarks:    {frames: [[[x, y], ...K], ...T], mouth_indices: [...]}
// HeadParams:   {format: "mctk.head_params", version: 1, fps,
//                frames: [{shape, expression, jaw, head_rotation, camera, light, pose}, ...]}
//
// Camera triples are (scale, tx, ty). Light vectors are channel-major SH
// coefficients (see shading.hpp). Head asset files (.mcta) are f32 containers
// with records template, faces (integer-valued), shape_basis, expression_basis,
// jaw_weights, jaw_pivot; axis conventions are those of headmodel.hpp.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mctk/fusion.hpp"
#include "mctk/headmodel.hpp"
#include "mctk/liploss.hpp"
#include "mctk/router.hpp"

namespace mctk {

using Json = nlohmann::json;

/// Shared defaults for the CLI. Every field has a documented valid range,
/// enforced by validate().
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t channels = 8;           // latent channels C, >= 1
  std::size_t patch = 8;              // adapter patch size, >= 1
  std::size_t image_size = 512;       // square render/condition size, >= 1
  std::size_t audio_half_width = 2;   // m, window W = 2m + 1
  double mask_logit = kMaskLogit;     // < -1e4
  double keypoint_sigma = 2.0;        // > 0
  double mouth_pad = 0.1;             // in [0, 1]
  std::size_t supervision_frames = kDefaultSupervisionFrames;  // T', >= 1
  std::size_t embed_dim = 64;         // sinusoidal width, even, >= 2

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

Json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const Json& j);

Json to_json(const ParamStream& s);
ParamStream param_stream_from_json(const Json& j);

Json to_json(const Recipe& r);
Recipe recipe_from_json(const Json& j);

Json to_json(const LandmarkTrack& track);
LandmarkTrack landmark_track_from_json(const Json& j);

Json head_params_to_json(const std::vector<HeadParams>& frames, double fps);
std::vector<HeadParams> head_params_from_json(const Json& j);

/// Parses a JSON file; syntax errors and missing files become FormatError / IoError.
Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed, newline-terminated, written atomically.
void write_json_file(const std::filesystem::path& path, const Json& j);

void save_head_asset(const std::filesystem::path& path, const HeadAsset& asset);
HeadAsset load_head_asset(const std::filesystem::path& path);

/// `<stem>.json` header (channels, mask_logit, branch order, activation, layer
/// widths) plus `<stem>.mctk` with records layer<i>.weight / layer<i>.bias.
void save_router_config(const std::filesystem::path& stem, const RouterConfig<float>& cfg);
RouterConfig<float> load_router_config(const std::filesystem::path& stem);

/// 64-bit FNV-1a of a byte range, as 16 lowercase hex digits.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

}  // namespace mctk
