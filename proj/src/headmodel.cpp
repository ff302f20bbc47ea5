// SPDX-License-Identifier: Apache-2.0
#include "mctk/headmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "mctk/rng.hpp"

namespace mctk {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 vertex_at(const Tensor& v, std::size_t i) { return {v[3 * i], v[3 * i + 1], v[3 * i + 2]}; }

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

void check_finite(std::span<const float> values, const char* what) {
  for (const float v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

void HeadAsset::validate() const {
  if (template_vertices.rank() != 2 || template_vertices.dim(1) != 3) {
    throw ShapeError("HeadAsset: template must be [V x 3], got " + shape_to_string(template_vertices.shape()));
  }
  const std::size_t v = vertex_count();
  require_shape(shape_basis, {v, 3, kShapeDim}, "HeadAsset shape basis");
  require_shape(expression_basis, {v, 3, kExpressionDim}, "HeadAsset expression basis");
  require_shape(jaw_weights, {v}, "HeadAsset jaw weights");
  require_shape(jaw_pivot, {3}, "HeadAsset jaw pivot");
  if (faces.empty()) throw ShapeError("HeadAsset: no faces");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (const auto idx : face) {
      if (idx >= v) throw ShapeError("HeadAsset: face " + std::to_string(f) + " index " + std::to_string(idx) +
                                     " out of range for " + std::to_string(v) + " vertices");
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw ShapeError("HeadAsset: face " + std::to_string(f) + " is degenerate");
    }
  }
  for (const float w : jaw_weights.data()) {
    if (!(w >= 0.0f && w <= 1.0f)) throw NumericError("HeadAsset: jaw weight outside [0, 1]");
  }
  if (!template_vertices.all_finite() || !shape_basis.all_finite() || !expression_basis.all_finite() ||
      !jaw_pivot.all_finite()) {
    throw NumericError("HeadAsset: non-finite geometry");
  }
}

void HeadParams::validate() const {
  check_finite(shape, "shape");
  check_finite(expression, "expression");
  check_finite(jaw, "jaw");
  check_finite(head_rotation, "head rotation");
  check_finite(light, "light");
  const float cam[] = {camera.scale, camera.tx, camera.ty};
  check_finite(cam, "camera");
  if (!(camera.scale > 0.0f)) throw ArgumentError("camera scale must be positive");
}

Tensor blendshape(const HeadAsset& asset, std::span<const float> shape, std::span<const float> expression) {
  if (shape.size() != kShapeDim || expression.size() != kExpressionDim) {
    throw ShapeError("blendshape: expected " + std::to_string(kShapeDim) + " shape and " +
                     std::to_string(kExpressionDim) + " expression coefficients, got " +
                     std::to_string(shape.size()) + " and " + std::to_string(expression.size()));
  }
  const std::size_t v = asset.vertex_count();
  Tensor out({v, 3});
  for (std::size_t i = 0; i < 3 * v; ++i) {
    double acc = asset.template_vertices[i];
    const float* sb = asset.shape_basis.data().data() + i * kShapeDim;
    for (std::size_t j = 0; j < kShapeDim; ++j) acc += static_cast<double>(sb[j]) * shape[j];
    const float* eb = asset.expression_basis.data().data() + i * kExpressionDim;
    for (std::size_t j = 0; j < kExpressionDim; ++j) acc += static_cast<double>(eb[j]) * expression[j];
    out[i] = static_cast<float>(acc);
  }
  return out;
}

Mat3 axis_angle_to_matrix(const Vec3& r) {
  const double theta = std::sqrt(dot(r, r));
  if (theta == 0.0) return {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const Vec3 k{r[0] / theta, r[1] / theta, r[2] / theta};
  const double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
  return {t * k[0] * k[0] + c,        t * k[0] * k[1] - s * k[2], t * k[0] * k[2] + s * k[1],
          t * k[0] * k[1] + s * k[2], t * k[1] * k[1] + c,        t * k[1] * k[2] - s * k[0],
          t * k[0] * k[2] - s * k[1], t * k[1] * k[2] + s * k[0], t * k[2] * k[2] + c};
}

Tensor axis_angle_to_matrix(const Tensor& r) {
  require_shape(r, {3}, "axis_angle_to_matrix");
  const Mat3 m = axis_angle_to_matrix(Vec3{r[0], r[1], r[2]});
  Tensor out({3, 3});
  for (std::size_t i = 0; i < 9; ++i) out[i] = static_cast<float>(m[i]);
  return out;
}

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return out;
}

Tensor apply_pose(const Tensor& vertices, const HeadAsset& asset, std::span<const float, 3> head_rotation,
                  std::span<const float, 3> jaw) {
  const std::size_t v = asset.vertex_count();
  require_shape(vertices, {v, 3}, "apply_pose vertices");
  const Mat3 r_jaw = axis_angle_to_matrix(Vec3{jaw[0], jaw[1], jaw[2]});
  const Mat3 r_head = axis_angle_to_matrix(Vec3{head_rotation[0], head_rotation[1], head_rotation[2]});
  const Vec3 pivot{asset.jaw_pivot[0], asset.jaw_pivot[1], asset.jaw_pivot[2]};

  Tensor out({v, 3});
  for (std::size_t i = 0; i < v; ++i) {
    Vec3 p = vertex_at(vertices, i);
    const double w = asset.jaw_weights[i];
    if (w != 0.0) {
      const Vec3 d = sub(p, pivot);
      const Vec3 rd = mat_vec(r_jaw, d);
      for (int a = 0; a < 3; ++a) p[a] += w * (rd[a] - d[a]);
    }
    const Vec3 q = mat_vec(r_head, p);
    for (int a = 0; a < 3; ++a) out[3 * i + a] = static_cast<float>(q[a]);
  }
  return out;
}

Projection project_weak_perspective(const Tensor& vertices, const Camera& camera, std::size_t height,
                                    std::size_t width) {
  if (!(camera.scale > 0.0f)) throw ArgumentError("project_weak_perspective: camera scale must be positive");
  if (height == 0 || width == 0) throw ArgumentError("project_weak_perspective: image size must be positive");
  if (vertices.rank() != 2 || vertices.dim(1) != 3) {
    throw ShapeError("project_weak_perspective: expected [V x 3], got " + shape_to_string(vertices.shape()));
  }
  const std::size_t v = vertices.dim(0);
  Projection p{Tensor({v, 2}), Tensor({v})};
  const double s = camera.scale, tx = camera.tx, ty = camera.ty;
  const double half_w = static_cast<double>(width) / 2.0, half_h = static_cast<double>(height) / 2.0;
  for (std::size_t i = 0; i < v; ++i) {
    const double x = vertices[3 * i], y = vertices[3 * i + 1], z = vertices[3 * i + 2];
    p.xy[2 * i] = static_cast<float>((s * x + tx + 1.0) * half_w);
    p.xy[2 * i + 1] = static_cast<float>((1.0 - (s * y + ty)) * half_h);
    p.depth[i] = static_cast<float>(-z);
  }
  return p;
}

Tensor vertex_normals(const Tensor& vertices, std::span<const Face> faces) {
  if (vertices.rank() != 2 || vertices.dim(1) != 3) {
    throw ShapeError("vertex_normals: expected [V x 3], got " + shape_to_string(vertices.shape()));
  }
  const std::size_t v = vertices.dim(0);
  std::vector<Vec3> acc(v, Vec3{0, 0, 0});
  for (const auto& f : faces) {
    for (const auto idx : f) {
      if (idx >= v) throw ShapeError("vertex_normals: face index out of range");
    }
    const Vec3 a = vertex_at(vertices, f[0]), b = vertex_at(vertices, f[1]), c = vertex_at(vertices, f[2]);
    const Vec3 n = cross(sub(b, a), sub(c, a));
    for (const auto idx : f) {
      for (int k = 0; k < 3; ++k) acc[idx][k] += n[k];
    }
  }
  Tensor out({v, 3});
  for (std::size_t i = 0; i < v; ++i) {
    const double len = std::sqrt(dot(acc[i], acc[i]));
    Vec3 n{0, 0, 1};
    if (len > 1e-20) n = {acc[i][0] / len, acc[i][1] / len, acc[i][2] / len};
    for (int k = 0; k < 3; ++k) out[3 * i + k] = static_cast<float>(n[k]);
  }
  return out;
}

namespace {

struct Icosphere {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
};

Icosphere icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere m;
  const Vec3 raw[12] = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (const auto& p : raw) m.vertices.push_back(normalized(p));
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return m;
}

void subdivide(Icosphere& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
  auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
    const auto key = std::minmax(a, b);
    const auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    const Vec3& pa = m.vertices[a];
    const Vec3& pb = m.vertices[b];
    m.vertices.push_back(normalized(Vec3{pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]}));
    const auto idx = static_cast<std::uint32_t>(m.vertices.size() - 1);
    midpoints.emplace(key, idx);
    return idx;
  };
  std::vector<Face> next;
  next.reserve(m.faces.size() * 4);
  for (const auto& f : m.faces) {
    const auto ab = midpoint(f[0], f[1]);
    const auto bc = midpoint(f[1], f[2]);
    const auto ca = midpoint(f[2], f[0]);
    next.push_back({f[0], ab, ca});
    next.push_back({f[1], bc, ab});
    next.push_back({f[2], ca, bc});
    next.push_back({ab, bc, ca});
  }
  m.faces = std::move(next);
}

/// One smooth scalar field on the sphere, values in [-1, 1].
struct SmoothField {
  std::array<Vec3, 3> wave;
  std::array<double, 3> phase;
  std::array<double, 3> amp;

  static SmoothField draw(Rng& rng) {
    SmoothField f{};
    double total = 0.0;
    for (int q = 0; q < 3; ++q) {
      Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
      dir = normalized(dir);
      const double freq = rng.uniform(0.5, 2.5);
      f.wave[q] = {dir[0] * freq, dir[1] * freq, dir[2] * freq};
      f.phase[q] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      f.amp[q] = rng.uniform(0.2, 1.0);
      total += f.amp[q];
    }
    for (auto& a : f.amp) a /= total;
    return f;
  }

  double operator()(const Vec3& p) const {
    double v = 0.0;
    for (int q = 0; q < 3; ++q) v += amp[q] * std::sin(dot(wave[q], p) + phase[q]);
    return v;
  }
};

}  // namespace

HeadAsset gen_desk_asset(std::uint64_t seed, int subdivisions) {
  if (subdivisions < 0 || subdivisions > 4) {
    throw ArgumentError("gen_desk_asset: subdivisions must be in [0, 4], got " + std::to_string(subdivisions));
  }
  Icosphere mesh = icosahedron();
  for (int i = 0; i < subdivisions; ++i) subdivide(mesh);

  // Orient every face outward.
  for (auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 n = cross(sub(mesh.vertices[f[1]], a), sub(mesh.vertices[f[2]], a));
    const Vec3 centroid{(a[0] + mesh.vertices[f[1]][0] + mesh.vertices[f[2]][0]),
                        (a[1] + mesh.vertices[f[1]][1] + mesh.vertices[f[2]][1]),
                        (a[2] + mesh.vertices[f[1]][2] + mesh.vertices[f[2]][2])};
    if (dot(n, centroid) < 0.0) std::swap(f[1], f[2]);
  }

  const std::size_t v = mesh.vertices.size();
  HeadAsset asset;
  asset.template_vertices = Tensor({v, 3});
  for (std::size_t i = 0; i < v; ++i) {
    for (int k = 0; k < 3; ++k) asset.template_vertices[3 * i + k] = static_cast<float>(mesh.vertices[i][k]);
  }
  asset.faces = mesh.faces;

  Rng rng(seed);
  constexpr double kMaxDisplacement = 0.1;
  auto fill_basis = [&](Tensor& basis, std::size_t columns, bool frontal) {
    basis = Tensor({v, 3, columns});
    for (std::size_t j = 0; j < columns; ++j) {
      const SmoothField field = SmoothField::draw(rng);
      for (std::size_t i = 0; i < v; ++i) {
        const Vec3& p = mesh.vertices[i];
        double magnitude = kMaxDisplacement * field(p);
        // Expression fields live on the camera-facing half.
        if (frontal) magnitude *= smoothstep01(p[2] + 0.5);
        for (int k = 0; k < 3; ++k) basis[(3 * i + k) * columns + j] = static_cast<float>(magnitude * p[k]);
      }
    }
  };
  fill_basis(asset.shape_basis, kShapeDim, false);
  fill_basis(asset.expression_basis, kExpressionDim, true);

  asset.jaw_weights = Tensor({v});
  Vec3 pivot{0, 0, 0};
  std::size_t lower = 0;
  for (std::size_t i = 0; i < v; ++i) {
    const double y = mesh.vertices[i][1];
    const double w = y < -1.0 / 3.0 ? smoothstep01((-1.0 / 3.0 - y) * 3.0) : 0.0;
    asset.jaw_weights[i] = static_cast<float>(w);
    if (w > 0.0) {
      for (int k = 0; k < 3; ++k) pivot[k] += mesh.vertices[i][k];
      ++lower;
    }
  }
  asset.jaw_pivot = Tensor({3});
  for (int k = 0; k < 3; ++k) asset.jaw_pivot[k] = static_cast<float>(lower ? pivot[k] / lower : 0.0);
  return asset;
}

}  // namespace mctk
