// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "mctk/fusion.hpp"
#include "support.hpp"

using namespace mctk;
using mctk::testing::random_stream;

TEST_SUITE("fusion") {

TEST_CASE("expression and jaw fusion are elementwise sums") {
  Rng rng(1);
  const auto a = testing::random_array<kExpressionDim>(rng);
  const auto b = testing::random_array<kExpressionDim>(rng);
  const auto e = fuse_expression(a, b);
  for (std::size_t i = 0; i < kExpressionDim; ++i) CHECK(e[i] == a[i] + b[i]);
  const std::array<float, kExpressionDim> zero{};
  CHECK(fuse_expression(a, zero) == a);
  const std::array<float, 3> j{0.1f, 0.2f, 0.3f}, r{0.01f, 0.0f, -0.3f}, z{};
  const auto jaw = fuse_jaw(j, r);
  for (int i = 0; i < 3; ++i) CHECK(jaw[i] == j[i] + r[i]);
  CHECK(fuse_jaw(j, z) == j);
  CHECK_THROWS_AS(fuse_jaw(std::span<const float>(j.data(), 2), r), ShapeError);
}

TEST_CASE("pose layout is head rotation then jaw") {
  const std::array<float, 3> head{1, 2, 3}, jaw{4, 5, 6};
  const auto pose = assemble_pose(head, jaw);
  for (int i = 0; i < 3; ++i) {
    CHECK(pose[i] == head[i]);
    CHECK(pose[3 + i] == jaw[i]);
  }
}

TEST_CASE("self recipe equals direct per-frame fusion") {
  Rng rng(2);
  StreamMap m{{"a", random_stream(rng, 6)}};
  const auto out = recombine(m, Recipe::self("a"));
  REQUIRE(out.size() == 6);
  const auto& s = m["a"];
  for (std::size_t t = 0; t < 6; ++t) {
    HeadParams direct;
    direct.shape = s.shape;
    direct.camera = s.camera;
    direct.light = s.light;
    direct.head_rotation = s.frames[t].head_rot;
    for (std::size_t i = 0; i < kExpressionDim; ++i)
      direct.expression[i] = s.frames[t].exp_spectre[i] + s.frames[t].exp_deca_residual[i];
    for (std::size_t i = 0; i < 3; ++i) direct.jaw[i] = s.frames[t].jaw_spectre[i] + s.frames[t].jaw_deca_residual[i];
    CHECK(out[t] == direct);
  }
}

TEST_CASE("each recipe slot controls only its attributes") {
  Rng rng(3);
  StreamMap m{{"a", random_stream(rng, 4)}, {"b", random_stream(rng, 4)}};
  const auto base = recombine(m, Recipe::self("a"));
  const auto other = recombine(m, Recipe::self("b"));

  Recipe r = Recipe::self("a");
  r.identity = "b";
  auto out = recombine(m, r);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(out[t].shape == other[t].shape);
    CHECK(out[t].camera == other[t].camera);
    CHECK(out[t].light == base[t].light);
    CHECK(out[t].head_rotation == base[t].head_rotation);
    CHECK(out[t].expression == base[t].expression);
    CHECK(out[t].jaw == base[t].jaw);
  }

  r = Recipe::self("a");
  r.lighting = "b";
  out = recombine(m, r);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(out[t].light == other[t].light);
    CHECK(out[t].shape == base[t].shape);
    CHECK(out[t].expression == base[t].expression);
    CHECK(out[t].head_rotation == base[t].head_rotation);
  }

  r = Recipe::self("a");
  r.head = "b";
  out = recombine(m, r);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(out[t].head_rotation == other[t].head_rotation);
    CHECK(out[t].expression == base[t].expression);
    CHECK(out[t].jaw == base[t].jaw);
    CHECK(out[t].light == base[t].light);
  }

  r = Recipe::self("a");
  r.mouth = "b";
  out = recombine(m, r);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(out[t].expression == other[t].expression);
    CHECK(out[t].jaw == other[t].jaw);
    CHECK(out[t].head_rotation == base[t].head_rotation);
    CHECK(out[t].shape == base[t].shape);
  }
}

TEST_CASE("frame count is the shorter of head and mouth unless given") {
  Rng rng(4);
  StreamMap m{{"long", random_stream(rng, 9)}, {"short", random_stream(rng, 5)}, {"id", random_stream(rng, 1)}};
  Recipe r{"id", "id", "long", "short", std::nullopt};
  CHECK(recombine(m, r).size() == 5);
  r.frame_count = 3;
  CHECK(recombine(m, r).size() == 3);
  r.frame_count = 6;
  CHECK_THROWS_AS(recombine(m, r), ArgumentError);
  r.frame_count = 0;
  CHECK_THROWS_AS(recombine(m, r), ArgumentError);
}

TEST_CASE("recombine rejects fps mismatch and unknown sources") {
  Rng rng(5);
  StreamMap m{{"a", random_stream(rng, 3, 25.0)}, {"b", random_stream(rng, 3, 30.0)}};
  Recipe r = Recipe::self("a");
  r.mouth = "b";
  CHECK_THROWS_AS(recombine(m, r), ArgumentError);
  r.mouth = "a";
  r.identity = "b";
  CHECK_NOTHROW(recombine(m, r));
  r.lighting = "missing";
  CHECK_THROWS_AS(recombine(m, r), ArgumentError);
}

TEST_CASE("fuse_and_render renders one frame per fused frame") {
  Rng rng(6);
  StreamMap m{{"a", random_stream(rng, 3)}};
  const HeadAsset asset = gen_desk_asset(1, 1);
  const auto frames = fuse_and_render(m, Recipe::self("a"), asset, {32, 32}, 2);
  CHECK(frames.size() == 3);
  CHECK(frames[0].covered_count() > 0);
}

}
