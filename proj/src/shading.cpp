// SPDX-License-Identifier: Apache-2.0
#include "mctk/shading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mctk/parallel.hpp"

namespace mctk {

namespace {

const double kY00 = 0.5 / std::sqrt(std::numbers::pi);
const double kY1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));
const double kY2 = std::sqrt(15.0 / (4.0 * std::numbers::pi));
const double kY20 = std::sqrt(5.0 / (16.0 * std::numbers::pi));
const double kY22 = std::sqrt(15.0 / (16.0 * std::numbers::pi));

struct Point {
  double x, y;
};

// Positive when p lies to the inside of the directed edge u -> v for a
// counter-clockwise (on screen, y-down) triangle.
double edge(const Point& u, const Point& v, const Point& p) {
  return (p.x - u.x) * (v.y - u.y) - (p.y - u.y) * (v.x - u.x);
}

bool top_left(const Point& u, const Point& v) {
  const double dx = v.x - u.x, dy = v.y - u.y;
  return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

bool inside(double w, bool owns_edge) { return w > 0.0 || (w == 0.0 && owns_edge); }

}  // namespace

ShLight ShLight::from_light_vector(std::span<const float> light) {
  if (light.size() != kLightDim) {
    throw ShapeError("ShLight: expected " + std::to_string(kLightDim) + " values, got " + std::to_string(light.size()));
  }
  ShLight l{Tensor({kShBands, 3})};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < kShBands; ++i) l.coeffs[i * 3 + ch] = light[ch * kShBands + i];
  }
  return l;
}

std::size_t ShadingFrame::covered_count() const {
  return static_cast<std::size_t>(std::count(coverage.begin(), coverage.end(), std::uint8_t{1}));
}

ShBasis sh_basis(const Vec3& n) {
  const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (std::abs(len - 1.0) > 1e-4) {
    throw ArgumentError("sh_basis: normal length " + std::to_string(len) + " is not 1");
  }
  const double x = n[0], y = n[1], z = n[2];
  return {kY00,          kY1 * y,      kY1 * z,  kY1 * x, kY2 * x * y, kY2 * y * z, kY20 * (3.0 * z * z - 1.0),
          kY2 * x * z, kY22 * (x * x - y * y)};
}

std::array<double, 3> sh_irradiance(const Vec3& normal, const ShLight& light) {
  require_shape(light.coeffs, {kShBands, 3}, "sh_irradiance light");
  const ShBasis y = sh_basis(normal);
  std::array<double, 3> rgb{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kShBands; ++i) acc += y[i] * light.coeffs[i * 3 + ch];
    rgb[ch] = acc;
  }
  return rgb;
}

Tensor shade_vertices(const Tensor& normals, const ShLight& light) {
  const std::size_t v = normals.dim(0);
  Tensor rgb({v, 3});
  for (std::size_t i = 0; i < v; ++i) {
    Vec3 n{normals[3 * i], normals[3 * i + 1], normals[3 * i + 2]};
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (auto& c : n) c /= len;
    const auto e = sh_irradiance(n, light);
    for (int ch = 0; ch < 3; ++ch) rgb[3 * i + ch] = static_cast<float>(e[ch]);
  }
  return rgb;
}

ShadingFrame rasterize(const Tensor& xy, const Tensor& depth, std::span<const Face> faces, const Tensor& vertex_rgb,
                       ImageSize size) {
  if (size.height == 0 || size.width == 0) throw ArgumentError("rasterize: image size must be positive");
  if (xy.rank() != 2 || xy.dim(1) != 2) throw ShapeError("rasterize: xy must be [V x 2]");
  const std::size_t v = xy.dim(0);
  require_shape(depth, {v}, "rasterize depth");
  require_shape(vertex_rgb, {v, 3}, "rasterize vertex colors");
  const std::size_t h = size.height, w = size.width;

  ShadingFrame frame{Tensor({h, w, 3}), Tensor::filled({h, w}, std::numeric_limits<float>::infinity()),
                     std::vector<std::uint8_t>(h * w, 0)};

  for (const auto& f : faces) {
    for (const auto idx : f) {
      if (idx >= v) throw ShapeError("rasterize: face index " + std::to_string(idx) + " out of range");
    }
    const Point a{xy[2 * f[0]], xy[2 * f[0] + 1]};
    const Point b{xy[2 * f[1]], xy[2 * f[1] + 1]};
    const Point c{xy[2 * f[2]], xy[2 * f[2] + 1]};
    const double area = edge(a, b, c);
    if (!(area > 0.0)) continue;

    const double min_x = std::min({a.x, b.x, c.x}), max_x = std::max({a.x, b.x, c.x});
    const double min_y = std::min({a.y, b.y, c.y}), max_y = std::max({a.y, b.y, c.y});
    const double x_lo = std::max(0.0, std::ceil(min_x - 0.5));
    const double x_hi = std::min(static_cast<double>(w) - 1.0, std::floor(max_x - 0.5));
    const double y_lo = std::max(0.0, std::ceil(min_y - 0.5));
    const double y_hi = std::min(static_cast<double>(h) - 1.0, std::floor(max_y - 0.5));
    if (x_lo > x_hi || y_lo > y_hi) continue;

    const bool own_a = top_left(b, c), own_b = top_left(c, a), own_c = top_left(a, b);
    const double za = depth[f[0]], zb = depth[f[1]], zc = depth[f[2]];

    for (auto py = static_cast<std::size_t>(y_lo); py <= static_cast<std::size_t>(y_hi); ++py) {
      for (auto px = static_cast<std::size_t>(x_lo); px <= static_cast<std::size_t>(x_hi); ++px) {
        const Point p{static_cast<double>(px) + 0.5, static_cast<double>(py) + 0.5};
        const double wa = edge(b, c, p), wb = edge(c, a, p), wc = edge(a, b, p);
        if (!inside(wa, own_a) || !inside(wb, own_b) || !inside(wc, own_c)) continue;
        const float z = static_cast<float>((wa * za + wb * zb + wc * zc) / area);
        const std::size_t pix = py * w + px;
        if (!(z < frame.depth[pix])) continue;
        frame.depth[pix] = z;
        frame.coverage[pix] = 1;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double col = (wa * vertex_rgb[3 * f[0] + ch] + wb * vertex_rgb[3 * f[1] + ch] +
                              wc * vertex_rgb[3 * f[2] + ch]) /
                             area;
          frame.pixels[pix * 3 + ch] = static_cast<float>(std::clamp(col, 0.0, 1.0));
        }
      }
    }
  }
  return frame;
}

ShadingFrame render_shading(const HeadAsset& asset, const HeadParams& params, ImageSize size) {
  params.validate();
  const Tensor neutral = blendshape(asset, params.shape, params.expression);
  const Tensor posed = apply_pose(neutral, asset, params.head_rotation, params.jaw);
  const Tensor normals = vertex_normals(posed, asset.faces);
  const Tensor rgb = shade_vertices(normals, ShLight::from_light_vector(params.light));
  const Projection proj = project_weak_perspective(posed, params.camera, size.height, size.width);
  return rasterize(proj.xy, proj.depth, asset.faces, rgb, size);
}

std::vector<ShadingFrame> render_frames(const HeadAsset& asset, std::span<const HeadParams> params, ImageSize size,
                                        int threads) {
  std::vector<ShadingFrame> frames(params.size());
  parallel_for(params.size(), threads, [&](std::size_t i) { frames[i] = render_shading(asset, params[i], size); });
  return frames;
}

std::vector<ShadingFrame> render_frames_serial(const HeadAsset& asset, std::span<const HeadParams> params,
                                               ImageSize size) {
  std::vector<ShadingFrame> frames;
  frames.reserve(params.size());
  for (const auto& p : params) frames.push_back(render_shading(asset, p, size));
  return frames;
}

Tensor luminance(const ShadingFrame& frame) {
  const std::size_t h = frame.height(), w = frame.width();
  Tensor out({h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    out[i] = static_cast<float>(0.299 * frame.pixels[3 * i] + 0.587 * frame.pixels[3 * i + 1] +
                                0.114 * frame.pixels[3 * i + 2]);
  }
  return out;
}

}  // namespace mctk
