// SPDX-License-Identifier: Apache-2.0
#include "mctk/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace mctk {

namespace {

template <std::size_t N>
std::array<float, N> add_exact(std::span<const float> a, std::span<const float> b, const char* what) {
  if (a.size() != N || b.size() != N) {
    throw ShapeError(std::string(what) + ": expected two vectors of length " + std::to_string(N) + ", got " +
                     std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  std::array<float, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename Range>
bool finite_range(const Range& r) {
  return std::all_of(std::begin(r), std::end(r), [](float v) { return std::isfinite(v); });
}

const ParamStream& lookup(const StreamMap& streams, const std::string& name, const char* slot) {
  const auto it = streams.find(name);
  if (it == streams.end()) {
    throw ArgumentError(std::string("recipe ") + slot + " source '" + name + "' is not a loaded stream");
  }
  return it->second;
}

}  // namespace

void ParamStream::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ArgumentError("ParamStream: fps must be positive");
  if (frames.empty()) throw ArgumentError("ParamStream: no frames");
  if (!finite_range(shape) || !finite_range(light) ||
      !std::isfinite(camera.scale) || !std::isfinite(camera.tx) || !std::isfinite(camera.ty)) {
    throw NumericError("ParamStream: non-finite identity or lighting");
  }
  if (!(camera.scale > 0.0f)) throw ArgumentError("ParamStream: camera scale must be positive");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    if (!finite_range(f.exp_spectre) || !finite_range(f.exp_deca_residual) || !finite_range(f.jaw_spectre) ||
        !finite_range(f.jaw_deca_residual) || !finite_range(f.head_rot)) {
      throw NumericError("ParamStream: frame " + std::to_string(t) + " has non-finite values");
    }
  }
}

std::array<float, kExpressionDim> fuse_expression(std::span<const float> exp_spectre,
                                                  std::span<const float> exp_deca_residual) {
  return add_exact<kExpressionDim>(exp_spectre, exp_deca_residual, "fuse_expression");
}

std::array<float, 3> fuse_jaw(std::span<const float> jaw_spectre, std::span<const float> jaw_deca_residual) {
  return add_exact<3>(jaw_spectre, jaw_deca_residual, "fuse_jaw");
}

std::array<float, 6> assemble_pose(std::span<const float> head_rotation, std::span<const float> jaw) {
  if (head_rotation.size() != 3 || jaw.size() != 3) {
    throw ShapeError("assemble_pose: expected two 3-vectors");
  }
  return {head_rotation[0], head_rotation[1], head_rotation[2], jaw[0], jaw[1], jaw[2]};
}

HeadParams fuse_frame(const ParamStream& identity, const ParamStream& lighting, const StreamFrame& head,
                      const StreamFrame& mouth) {
  HeadParams p;
  p.shape = identity.shape;
  p.camera = identity.camera;
  p.light = lighting.light;
  p.head_rotation = head.head_rot;
  p.expression = fuse_expression(mouth.exp_spectre, mouth.exp_deca_residual);
  p.jaw = fuse_jaw(mouth.jaw_spectre, mouth.jaw_deca_residual);
  return p;
}

std::vector<HeadParams> recombine(const StreamMap& streams, const Recipe& recipe) {
  const ParamStream& identity = lookup(streams, recipe.identity, "identity");
  const ParamStream& lighting = lookup(streams, recipe.lighting, "lighting");
  const ParamStream& head = lookup(streams, recipe.head, "head");
  const ParamStream& mouth = lookup(streams, recipe.mouth, "mouth");
  for (const ParamStream* s : {&identity, &lighting, &head, &mouth}) s->validate();
  if (head.fps != mouth.fps) {
    throw ArgumentError("recombine: head stream runs at " + std::to_string(head.fps) + " fps but mouth stream at " +
                        std::to_string(mouth.fps) + " fps; resampling is not supported");
  }
  const std::size_t available = std::min(head.frames.size(), mouth.frames.size());
  const std::size_t count = recipe.frame_count.value_or(available);
  if (count == 0) throw ArgumentError("recombine: frame_count must be positive");
  if (count > available) {
    throw ArgumentError("recombine: frame_count " + std::to_string(count) + " exceeds the " +
                        std::to_string(available) + " frames shared by head and mouth sources");
  }
  std::vector<HeadParams> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) out.push_back(fuse_frame(identity, lighting, head.frames[t], mouth.frames[t]));
  return out;
}

std::vector<ShadingFrame> fuse_and_render(const StreamMap& streams, const Recipe& recipe, const HeadAsset& asset,
                                          ImageSize size, int threads) {
  asset.validate();
  const auto params = recombine(streams, recipe);
  return render_frames(asset, params, size, threads);
}

}  // namespace mctk
