// SPDX-License-Identifier: Apache-2.0
#include "mctk/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mctk/parallel.hpp"
#include "mctk/rng.hpp"

namespace mctk {

AudioWindows build_audio_windows(const AudioTrack& track, std::size_t half_width) {
  const Tensor& a = track.features;
  if (a.is_null()) throw ArgumentError("build_audio_windows: empty track");
  if (a.rank() != 3) throw ShapeError("build_audio_windows: expected [T x L x C_a], got " + shape_to_string(a.shape()));
  if (!a.all_finite()) throw NumericError("build_audio_windows: track contains non-finite values");
  const std::size_t frames = a.dim(0), tokens = a.dim(1), feat = a.dim(2);
  const std::size_t width = 2 * half_width + 1;
  const std::size_t stride = tokens * feat;

  AudioWindows out{Tensor({frames, width, tokens, feat}), half_width};
  const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::ptrdiff_t src = std::clamp(static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(half_width),
                                            std::ptrdiff_t{0}, last);
      std::copy_n(a.data().begin() + src * static_cast<std::ptrdiff_t>(stride), stride,
                  out.windows.data().begin() + (t * width + j) * stride);
    }
  }
  return out;
}

AudioAdapter AudioAdapter::seeded(std::size_t in_width, std::size_t channels, std::size_t grid_h, std::size_t grid_w,
                                  std::uint64_t seed) {
  if (in_width == 0 || channels == 0 || grid_h == 0 || grid_w == 0) {
    throw ArgumentError("AudioAdapter: all dimensions must be positive");
  }
  const std::size_t out = channels * grid_h * grid_w;
  AudioAdapter a{channels, grid_h, grid_w, Tensor({out, in_width}), Tensor({out})};
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_width));
  for (auto& w : a.weight.data()) w = static_cast<float>(rng.uniform(-bound, bound));
  return a;
}

Tensor audio_to_spatial(const AudioWindows& windows, const AudioAdapter& adapter, int threads) {
  const Tensor& win = windows.windows;
  if (win.rank() != 4) throw ShapeError("audio_to_spatial: windows must be [T x W x L x C_a]");
  const std::size_t frames = win.dim(0);
  const std::size_t in = win.dim(1) * win.dim(2) * win.dim(3);
  if (adapter.in_width() != in) {
    throw ShapeError("audio_to_spatial: adapter expects input width " + std::to_string(adapter.in_width()) +
                     ", windows flatten to " + std::to_string(in));
  }
  const std::size_t out = adapter.channels * adapter.grid_h * adapter.grid_w;
  Tensor latent({frames, adapter.channels, adapter.grid_h, adapter.grid_w});
  parallel_for(frames, threads, [&](std::size_t t) {
    const float* x = win.data().data() + t * in;
    float* y = latent.data().data() + t * out;
    for (std::size_t o = 0; o < out; ++o) {
      const float* row = adapter.weight.data().data() + o * in;
      float acc = adapter.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  });
  return latent;
}

PatchAdapter PatchAdapter::seeded(std::size_t in_channels, std::size_t channels, std::size_t patch,
                                  std::uint64_t seed) {
  if (in_channels == 0 || channels == 0 || patch == 0) throw ArgumentError("PatchAdapter: dimensions must be positive");
  const std::size_t fan_in = in_channels * patch * patch;
  PatchAdapter a{patch, in_channels, channels, Tensor({channels, fan_in}), Tensor({channels})};
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& w : a.weight.data()) w = static_cast<float>(rng.uniform(-bound, bound));
  return a;
}

namespace {

void embed_one(const float* image, std::size_t height, std::size_t width, const PatchAdapter& adapter, float* out) {
  const std::size_t p = adapter.patch, cin = adapter.in_channels, cout = adapter.channels;
  const std::size_t gh = height / p, gw = width / p, fan_in = cin * p * p;
  std::vector<float> patch(fan_in);
  for (std::size_t i = 0; i < gh; ++i) {
    for (std::size_t j = 0; j < gw; ++j) {
      std::size_t k = 0;
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx) patch[k++] = image[(c * height + i * p + dy) * width + j * p + dx];
      for (std::size_t o = 0; o < cout; ++o) {
        const float* row = adapter.weight.data().data() + o * fan_in;
        float acc = adapter.bias[o];
        for (std::size_t q = 0; q < fan_in; ++q) acc += row[q] * patch[q];
        out[(o * gh + i) * gw + j] = acc;
      }
    }
  }
}

void check_patch_input(std::size_t cin, std::size_t height, std::size_t width, const PatchAdapter& adapter) {
  if (cin != adapter.in_channels) {
    throw ShapeError("patch_embed: image has " + std::to_string(cin) + " channels, adapter expects " +
                     std::to_string(adapter.in_channels));
  }
  if (height % adapter.patch != 0 || width % adapter.patch != 0) {
    throw ArgumentError("patch_embed: image " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by patch size " + std::to_string(adapter.patch));
  }
}

}  // namespace

Tensor patch_embed(const Tensor& image, const PatchAdapter& adapter) {
  if (image.rank() != 3) throw ShapeError("patch_embed: expected [C_in x H x W], got " + shape_to_string(image.shape()));
  const std::size_t height = image.dim(1), width = image.dim(2);
  check_patch_input(image.dim(0), height, width, adapter);
  Tensor out({adapter.channels, height / adapter.patch, width / adapter.patch});
  embed_one(image.data().data(), height, width, adapter, out.data().data());
  return out;
}

Tensor patch_embed_frames(const Tensor& frames, const PatchAdapter& adapter, int threads) {
  if (frames.rank() != 4) {
    throw ShapeError("patch_embed_frames: expected [T x C_in x H x W], got " + shape_to_string(frames.shape()));
  }
  const std::size_t t = frames.dim(0), height = frames.dim(2), width = frames.dim(3);
  check_patch_input(frames.dim(1), height, width, adapter);
  const std::size_t gh = height / adapter.patch, gw = width / adapter.patch;
  Tensor out({t, adapter.channels, gh, gw});
  const std::size_t in_stride = frames.dim(1) * height * width, out_stride = adapter.channels * gh * gw;
  parallel_for(t, threads, [&](std::size_t i) {
    embed_one(frames.data().data() + i * in_stride, height, width, adapter, out.data().data() + i * out_stride);
  });
  return out;
}

Tensor rasterize_keypoints(std::span<const Keypoint> keypoints, ImageSize size, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("rasterize_keypoints: sigma must be positive");
  if (size.height == 0 || size.width == 0) throw ArgumentError("rasterize_keypoints: image size must be positive");
  const std::size_t h = size.height, w = size.width;
  std::vector<double> acc(h * w, 0.0);
  const double radius = 6.0 * sigma;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (const auto& kp : keypoints) {
    const double cx = kp[0], cy = kp[1];
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw NumericError("rasterize_keypoints: non-finite keypoint");
    const double x_lo = std::max(0.0, std::ceil(cx - radius - 0.5));
    const double x_hi = std::min(static_cast<double>(w) - 1.0, std::floor(cx + radius - 0.5));
    const double y_lo = std::max(0.0, std::ceil(cy - radius - 0.5));
    const double y_hi = std::min(static_cast<double>(h) - 1.0, std::floor(cy + radius - 0.5));
    if (x_lo > x_hi || y_lo > y_hi) continue;
    for (auto y = static_cast<std::size_t>(y_lo); y <= static_cast<std::size_t>(y_hi); ++y) {
      const double dy = static_cast<double>(y) + 0.5 - cy;
      for (auto x = static_cast<std::size_t>(x_lo); x <= static_cast<std::size_t>(x_hi); ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        acc[y * w + x] += std::exp(-(dx * dx + dy * dy) * inv_two_var);
      }
    }
  }
  Tensor out({1, h, w});
  for (std::size_t i = 0; i < h * w; ++i) out[i] = static_cast<float>(std::min(acc[i], 1.0));
  return out;
}

std::vector<ConditionSet<float>> make_condition_sets(const ConditionInputs& in) {
  const std::array<const std::optional<Tensor>*, kBranchCount> per_frame = {nullptr, &in.shading, &in.motion,
                                                                           &in.audio};
  std::optional<Shape> latent;  // [C x h x w]
  std::optional<std::size_t> frames = in.frames;

  auto agree = [&](const Shape& s, const char* name) {
    if (!latent) {
      latent = s;
    } else if (*latent != s) {
      throw ShapeError(std::string("make_condition_sets: ") + name + " latent " + shape_to_string(s) +
                       " disagrees with " + shape_to_string(*latent));
    }
  };

  if (in.reference) {
    if (in.reference->rank() != 3) throw ShapeError("make_condition_sets: reference latent must be [C x h x w]");
    agree(in.reference->shape(), "reference");
  }
  for (std::size_t k = 1; k < kBranchCount; ++k) {
    const auto& opt = *per_frame[k];
    if (!opt) continue;
    if (opt->rank() != 4) {
      throw ShapeError(std::string("make_condition_sets: ") + std::string(kBranchNames[k]) +
                       " latents must be [T x C x h x w]");
    }
    agree(Shape(opt->shape().begin() + 1, opt->shape().end()), std::string(kBranchNames[k]).c_str());
    if (frames && *frames != opt->dim(0)) {
      throw ShapeError("make_condition_sets: " + std::string(kBranchNames[k]) + " has " + std::to_string(opt->dim(0)) +
                       " frames, expected " + std::to_string(*frames));
    }
    frames = opt->dim(0);
  }
  if (!latent) throw ArgumentError("make_condition_sets: no condition latents given");
  if (!frames || *frames == 0) throw ArgumentError("make_condition_sets: frame count unknown");

  const Shape frame_shape{1, (*latent)[0], (*latent)[1], (*latent)[2]};
  const std::size_t frame_size = shape_volume(*latent);
  std::vector<ConditionSet<float>> sets(*frames);
  for (std::size_t t = 0; t < *frames; ++t) {
    auto& cs = sets[t];
    cs.mask = {in.reference.has_value(), in.shading.has_value(), in.motion.has_value(), in.audio.has_value()};
    for (std::size_t k = 0; k < kBranchCount; ++k) cs.mask[k] = cs.mask[k] && in.dropout[k];
    if (in.reference) cs.features[0] = in.reference->reshaped(frame_shape);
    for (std::size_t k = 1; k < kBranchCount; ++k) {
      const auto& opt = *per_frame[k];
      if (!opt) continue;
      std::vector<float> slice(opt->data().begin() + t * frame_size, opt->data().begin() + (t + 1) * frame_size);
      cs.features[k] = Tensor(frame_shape, std::move(slice));
    }
  }
  return sets;
}

}  // namespace mctk
