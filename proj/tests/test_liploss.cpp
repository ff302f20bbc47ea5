// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "mctk/liploss.hpp"
#include "support.hpp"

using namespace mctk;
using mctk::testing::random_tensor;

namespace {

LandmarkTrack random_track(Rng& rng, std::size_t frames, std::size_t k, double extent) {
  LandmarkTrack t{Tensor({frames, k, 2}), {}};
  for (auto& v : t.points.data()) v = static_cast<float>(rng.uniform(0.0, extent));
  for (std::size_t i = k / 2; i < k; ++i) t.mouth_indices.push_back(i);
  return t;
}

}  // namespace

TEST_SUITE("liploss") {

TEST_CASE("mouth box hand case") {
  LandmarkTrack t{Tensor({2, 3, 2}, {0, 0, 10, 20, 30, 20,  //
                                     0, 0, 14, 22, 26, 40}),
                  {1, 2}};
  // Union x in [10, 30], y in [20, 40]; pad 0.1 grows by 2 on each side.
  const MouthBox b = stable_mouth_bbox(t, 0.1, {100, 100});
  CHECK(b == MouthBox{8, 18, 33, 43});
  CHECK(stable_mouth_bbox(t, 0.0, {100, 100}) == MouthBox{10, 20, 31, 41});
  CHECK(stable_mouth_bbox(t, 0.1, {35, 30}) == MouthBox{8, 18, 30, 35});
  CHECK_THROWS_AS(stable_mouth_bbox(t, -0.1, {100, 100}), ArgumentError);
}

TEST_CASE("mouth box contains every mouth landmark") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_track(rng, 1 + rng.below(20), 10, 200.0);
    const MouthBox b = stable_mouth_bbox(t, rng.uniform(0.0, 0.3), {256, 256});
    for (std::size_t f = 0; f < t.frames(); ++f)
      for (auto i : t.mouth_indices) CHECK(b.contains(t.points(f, i, 0), t.points(f, i, 1)));
  }
}

TEST_CASE("bilinear resize hand values") {
  // A 1x2 row [0, 1] upsampled to 4 samples at half-pixel centres.
  Tensor frames({1, 3, 2, 2}, {0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  const Tensor r = crop_resize(frames, {0, 0, 2, 2}, 4);
  const float expect[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) CHECK(r(0, 1, y, x) == expect[x]);
}

TEST_CASE("crop at native size is the identity on the box") {
  Rng rng(2);
  const Tensor frames = random_tensor({2, 3, 10, 12}, rng);
  const Tensor r = crop_resize(frames, {3, 2, 9, 8}, 6);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 6; ++x) CHECK(r(t, c, y, x) == frames(t, c, y + 2, x + 3));
  CHECK_THROWS_AS(crop_resize(frames, {3, 2, 13, 8}, 6), ArgumentError);
  CHECK_THROWS_AS(crop_resize(frames, {3, 2, 3, 8}, 6), ArgumentError);
}

TEST_CASE("parallel crop is bit-identical to serial") {
  Rng rng(3);
  const Tensor frames = random_tensor({5, 3, 40, 50}, rng);
  const MouthBox box{7, 5, 33, 29};
  const Tensor serial = crop_resize_serial(frames, box);
  for (int threads : {1, 2, 4}) CHECK(crop_resize(frames, box, kLipCropSize, threads).bit_equal(serial));
}

TEST_CASE("proxy features") {
  const Tensor flat = Tensor::filled({1, 3, 224, 224}, 0.3f);
  const Tensor f = proxy_lip_features(flat);
  REQUIRE(f.shape() == Shape{1, 196});
  for (float v : f.data()) CHECK(std::abs(v) < 1e-7);
  // One bright block: value 1 - 1/196 there, -1/196 elsewhere.
  Tensor block({1, 3, 224, 224});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 16; y < 32; ++y)
      for (std::size_t x = 32; x < 48; ++x) block(0, c, y, x) = 1.0f;
  const Tensor g = proxy_lip_features(block);
  CHECK(g(0, 14 + 2) == doctest::Approx(1.0 - 1.0 / 196.0).epsilon(1e-6));
  CHECK(g(0, 0) == doctest::Approx(-1.0 / 196.0).epsilon(1e-5));
  CHECK_THROWS_AS(proxy_lip_features(Tensor({1, 3, 100, 100})), ShapeError);
}

TEST_CASE("lip loss extremes and scale invariance") {
  Rng rng(4);
  const Tensor a = random_tensor({3, 196}, rng);
  Tensor neg = a, scaled = a, orth({3, 196});
  for (auto& v : neg.data()) v = -v;
  for (auto& v : scaled.data()) v *= 7.5f;
  CHECK(std::abs(lip_consistency_loss(a, a)) < 1e-7);
  CHECK(std::abs(lip_consistency_loss(a, neg) - 2.0) < 1e-7);
  Tensor e1({1, 4}, {1, 0, 0, 0}), e2({1, 4}, {0, 3, 0, 0});
  CHECK(std::abs(lip_consistency_loss(e1, e2) - 1.0) < 1e-7);
  CHECK(std::abs(lip_consistency_loss(a, scaled) - lip_consistency_loss(a, a)) < 1e-6);
  const Tensor b = random_tensor({3, 196}, rng);
  CHECK(std::abs(lip_consistency_loss(scaled, b) - lip_consistency_loss(a, b)) < 1e-6);
  // Zero rows: cosine 0 against a nonzero row, 1 against another zero row.
  CHECK(lip_consistency_loss(Tensor({1, 4}), e1) == 1.0);
  CHECK(lip_consistency_loss(Tensor({2, 4}), Tensor({2, 4})) == 0.0);
  CHECK_THROWS_AS(lip_consistency_loss(a, Tensor({2, 196})), ShapeError);
}

TEST_CASE("supervision frame draw") {
  const auto a = sample_supervision_frames(16, 2, 9);
  CHECK(a == sample_supervision_frames(16, 2, 9));
  CHECK(a.size() == 2);
  CHECK(a[0] < a[1]);
  CHECK(a[1] < 16);
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 200; ++s)
    for (auto i : sample_supervision_frames(8, 3, s)) seen.insert(i);
  CHECK(seen.size() == 8);
  const auto all = sample_supervision_frames(5, 5, 1);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(sample_supervision_frames(3, 4, 1), ArgumentError);
  CHECK_THROWS_AS(sample_supervision_frames(3, 0, 1), ArgumentError);
}

TEST_CASE("total loss is the plain sum") {
  CHECK(total_loss(0.5, 0.25, 1.0) == 1.75);
  CHECK_THROWS_AS(total_loss(NAN, 0, 0), NumericError);
}

}
