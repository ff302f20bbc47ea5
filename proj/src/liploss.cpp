// SPDX-License-Identifier: Apache-2.0
#include "mctk/liploss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mctk/parallel.hpp"
#include "mctk/rng.hpp"

namespace mctk {

void LandmarkTrack::validate() const {
  if (points.rank() != 3 || points.dim(2) != 2) {
    throw ShapeError("LandmarkTrack: points must be [T x K x 2], got " + shape_to_string(points.shape()));
  }
  if (!points.all_finite()) throw NumericError("LandmarkTrack: non-finite coordinates");
  if (mouth_indices.empty()) throw ArgumentError("LandmarkTrack: mouth index set is empty");
  for (const auto i : mouth_indices) {
    if (i >= points.dim(1)) {
      throw ArgumentError("LandmarkTrack: mouth index " + std::to_string(i) + " outside [0, " +
                          std::to_string(points.dim(1)) + ")");
    }
  }
}

MouthBox stable_mouth_bbox(const LandmarkTrack& track, double pad, ImageSize image) {
  track.validate();
  if (!(pad >= 0.0)) throw ArgumentError("stable_mouth_bbox: pad must be >= 0");
  const std::size_t k = track.points.dim(1);
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (std::size_t t = 0; t < track.frames(); ++t) {
    for (const auto i : track.mouth_indices) {
      const double x = track.points[(t * k + i) * 2], y = track.points[(t * k + i) * 2 + 1];
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  const double pad_x = pad * (max_x - min_x), pad_y = pad * (max_y - min_y);
  MouthBox box;
  box.x0 = static_cast<std::int64_t>(std::floor(min_x - pad_x));
  box.y0 = static_cast<std::int64_t>(std::floor(min_y - pad_y));
  box.x1 = static_cast<std::int64_t>(std::floor(max_x + pad_x)) + 1;
  box.y1 = static_cast<std::int64_t>(std::floor(max_y + pad_y)) + 1;
  box.x0 = std::clamp<std::int64_t>(box.x0, 0, static_cast<std::int64_t>(image.width));
  box.x1 = std::clamp<std::int64_t>(box.x1, 0, static_cast<std::int64_t>(image.width));
  box.y0 = std::clamp<std::int64_t>(box.y0, 0, static_cast<std::int64_t>(image.height));
  box.y1 = std::clamp<std::int64_t>(box.y1, 0, static_cast<std::int64_t>(image.height));
  if (box.x0 >= box.x1 || box.y0 >= box.y1) {
    throw ArgumentError("stable_mouth_bbox: mouth landmarks fall outside the image");
  }
  return box;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[d] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

void check_crop(const Tensor& frames, const MouthBox& box, std::size_t out) {
  if (frames.rank() != 4 || frames.dim(1) != 3) {
    throw ShapeError("crop_resize: frames must be [T x 3 x H x W], got " + shape_to_string(frames.shape()));
  }
  if (out == 0) throw ArgumentError("crop_resize: output size must be positive");
  const auto h = static_cast<std::int64_t>(frames.dim(2)), w = static_cast<std::int64_t>(frames.dim(3));
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > w || box.y1 > h || box.x0 >= box.x1 || box.y0 >= box.y1) {
    throw ArgumentError("crop_resize: box [" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                        std::to_string(box.x1) + "," + std::to_string(box.y1) + ") is degenerate or outside " +
                        std::to_string(w) + "x" + std::to_string(h));
  }
}

void crop_one(const Tensor& frames, std::size_t t, const MouthBox& box, const std::vector<Tap>& xs,
              const std::vector<Tap>& ys, std::size_t out, Tensor& dst) {
  const std::size_t h = frames.dim(2), w = frames.dim(3);
  for (std::size_t c = 0; c < 3; ++c) {
    const float* plane = frames.data().data() + (t * 3 + c) * h * w;
    float* target = dst.data().data() + (t * 3 + c) * out * out;
    for (std::size_t oy = 0; oy < out; ++oy) {
      const Tap& ty = ys[oy];
      const float* r0 = plane + (static_cast<std::size_t>(box.y0) + ty.lo) * w + static_cast<std::size_t>(box.x0);
      const float* r1 = plane + (static_cast<std::size_t>(box.y0) + ty.hi) * w + static_cast<std::size_t>(box.x0);
      for (std::size_t ox = 0; ox < out; ++ox) {
        const Tap& tx = xs[ox];
        const double top = r0[tx.lo] + (r0[tx.hi] - static_cast<double>(r0[tx.lo])) * tx.frac;
        const double bottom = r1[tx.lo] + (r1[tx.hi] - static_cast<double>(r1[tx.lo])) * tx.frac;
        target[oy * out + ox] = static_cast<float>(top + (bottom - top) * ty.frac);
      }
    }
  }
}

}  // namespace

Tensor crop_resize(const Tensor& frames, const MouthBox& box, std::size_t out, int threads) {
  check_crop(frames, box, out);
  const auto xs = bilinear_taps(static_cast<std::size_t>(box.width()), out);
  const auto ys = bilinear_taps(static_cast<std::size_t>(box.height()), out);
  Tensor dst({frames.dim(0), 3, out, out});
  parallel_for(frames.dim(0), threads, [&](std::size_t t) { crop_one(frames, t, box, xs, ys, out, dst); });
  return dst;
}

Tensor crop_resize_serial(const Tensor& frames, const MouthBox& box, std::size_t out) {
  check_crop(frames, box, out);
  const auto xs = bilinear_taps(static_cast<std::size_t>(box.width()), out);
  const auto ys = bilinear_taps(static_cast<std::size_t>(box.height()), out);
  Tensor dst({frames.dim(0), 3, out, out});
  for (std::size_t t = 0; t < frames.dim(0); ++t) crop_one(frames, t, box, xs, ys, out, dst);
  return dst;
}

Tensor proxy_lip_features(const Tensor& crops) {
  if (crops.rank() != 4 || crops.dim(1) != 3 || crops.dim(2) != kLipCropSize || crops.dim(3) != kLipCropSize) {
    throw ShapeError("proxy_lip_features: expected [T x 3 x 224 x 224], got " + shape_to_string(crops.shape()));
  }
  constexpr std::size_t n = kLipCropSize, block = kLipCropSize / kProxyGrid;
  const std::size_t frames = crops.dim(0);
  Tensor feats({frames, kProxyFeatureDim});
  for (std::size_t t = 0; t < frames; ++t) {
    const float* r = crops.data().data() + t * 3 * n * n;
    const float* g = r + n * n;
    const float* b = g + n * n;
    std::array<double, kProxyFeatureDim> cell{};
    for (std::size_t by = 0; by < kProxyGrid; ++by) {
      for (std::size_t bx = 0; bx < kProxyGrid; ++bx) {
        double acc = 0.0;
        for (std::size_t y = by * block; y < (by + 1) * block; ++y) {
          for (std::size_t x = bx * block; x < (bx + 1) * block; ++x) {
            const std::size_t i = y * n + x;
            acc += 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
          }
        }
        cell[by * kProxyGrid + bx] = acc / static_cast<double>(block * block);
      }
    }
    const double mean = std::accumulate(cell.begin(), cell.end(), 0.0) / static_cast<double>(kProxyFeatureDim);
    for (std::size_t i = 0; i < kProxyFeatureDim; ++i) feats[t * kProxyFeatureDim + i] = static_cast<float>(cell[i] - mean);
  }
  return feats;
}

double lip_consistency_loss(const Tensor& f_pred, const Tensor& f_gt) {
  if (f_pred.shape() != f_gt.shape() || f_pred.rank() != 2) {
    throw ShapeError("lip_consistency_loss: expected matching [T' x D] features, got " +
                     shape_to_string(f_pred.shape()) + " and " + shape_to_string(f_gt.shape()));
  }
  const std::size_t frames = f_pred.dim(0), d = f_pred.dim(1);
  double total_cos = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    double dot = 0.0, np = 0.0, ng = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double p = f_pred[t * d + i], g = f_gt[t * d + i];
      dot += p * g;
      np += p * p;
      ng += g * g;
    }
    if (np > 0.0 && ng > 0.0) {
      total_cos += std::clamp(dot / (std::sqrt(np) * std::sqrt(ng)), -1.0, 1.0);
    } else if (np == 0.0 && ng == 0.0) {
      total_cos += 1.0;
    }
  }
  return 1.0 - total_cos / static_cast<double>(frames);
}

double total_loss(double l_svd, double l_app, double l_lip) {
  if (!std::isfinite(l_svd) || !std::isfinite(l_app) || !std::isfinite(l_lip)) {
    throw NumericError("total_loss: non-finite loss term");
  }
  return l_svd + l_app + l_lip;
}

std::vector<std::size_t> sample_supervision_frames(std::size_t frames, std::size_t t_prime, std::uint64_t seed) {
  if (t_prime == 0 || t_prime > frames) {
    throw ArgumentError("sample_supervision_frames: need 1 <= t_prime <= T, got t_prime=" + std::to_string(t_prime) +
                        " T=" + std::to_string(frames));
  }
  std::vector<std::size_t> pool(frames);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < t_prime; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(frames - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(t_prime);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace mctk
