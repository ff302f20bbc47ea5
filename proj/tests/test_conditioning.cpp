// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mctk/conditioning.hpp"
#include "support.hpp"

using namespace mctk;
using mctk::testing::random_tensor;

TEST_SUITE("conditioning") {

TEST_CASE("audio windows are slices with edge replication") {
  for (std::size_t frames : {1, 3, 5, 16}) {
    Rng rng(frames);
    const Tensor a = random_tensor({frames, 2, 3}, rng);
    const AudioWindows w = build_audio_windows({a}, 2);
    CHECK(w.window_length() == 5);
    REQUIRE(w.windows.shape() == Shape{frames, 5, 2, 3});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < 5; ++j) {
        const long src = std::clamp<long>(static_cast<long>(t + j) - 2, 0, static_cast<long>(frames) - 1);
        for (std::size_t l = 0; l < 2; ++l)
          for (std::size_t c = 0; c < 3; ++c) CHECK(w.windows(t, j, l, c) == a(src, l, c));
      }
  }
  const AudioWindows one = build_audio_windows({Tensor({4, 1, 1}, {1, 2, 3, 4})}, 0);
  CHECK(one.windows.shape() == Shape{4, 1, 1, 1});
  CHECK_THROWS_AS(build_audio_windows({Tensor({4, 2})}, 2), ShapeError);
}

TEST_CASE("audio adapter is an affine map per frame") {
  Rng rng(2);
  const AudioWindows w = build_audio_windows({random_tensor({6, 2, 4}, rng)}, 2);
  AudioAdapter ad = AudioAdapter::seeded(40, 3, 2, 2, 7);
  for (float b : ad.bias.data()) CHECK(b == 0.0f);
  ad.bias = random_tensor({12}, rng);
  const Tensor lat = audio_to_spatial(w, ad);
  REQUIRE(lat.shape() == Shape{6, 3, 2, 2});
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t o = 0; o < 12; ++o) {
      double acc = ad.bias[o];
      for (std::size_t i = 0; i < 40; ++i) acc += static_cast<double>(ad.weight(o, i)) * w.windows[t * 40 + i];
      CHECK(lat[t * 12 + o] == doctest::Approx(acc).epsilon(1e-5));
    }
  CHECK(audio_to_spatial(w, ad, 4).bit_equal(lat));
  CHECK_THROWS_AS(audio_to_spatial(w, AudioAdapter::seeded(39, 3, 2, 2, 7)), ShapeError);
}

TEST_CASE("patch embedding maps patch (i, j) to cell (i, j)") {
  Rng rng(3);
  const Tensor img = random_tensor({2, 8, 12}, rng);
  const PatchAdapter ad = PatchAdapter::seeded(2, 3, 4, 5);
  const Tensor out = patch_embed(img, ad);
  REQUIRE(out.shape() == Shape{3, 2, 3});
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double acc = ad.bias[o];
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t dy = 0; dy < 4; ++dy)
            for (std::size_t dx = 0; dx < 4; ++dx)
              acc += static_cast<double>(ad.weight(o, (c * 4 + dy) * 4 + dx)) * img(c, i * 4 + dy, j * 4 + dx);
        CHECK(out(o, i, j) == doctest::Approx(acc).epsilon(1e-5));
      }
  const Tensor frames = random_tensor({3, 2, 8, 12}, rng);
  const Tensor batched = patch_embed_frames(frames, ad, 4);
  const Tensor second = patch_embed(Tensor({2, 8, 12}, std::vector<float>(frames.data().begin() + 192,
                                                                          frames.data().begin() + 384)),
                                    ad);
  CHECK(std::equal(second.data().begin(), second.data().end(), batched.data().begin() + 18));
  CHECK_THROWS_AS(patch_embed(random_tensor({2, 9, 12}, rng), ad), ArgumentError);
  CHECK_THROWS_AS(patch_embed(random_tensor({3, 8, 12}, rng), ad), ShapeError);
}

TEST_CASE("keypoint splats") {
  const Keypoint centered[] = {{10.5f, 20.5f}};
  const Tensor m = rasterize_keypoints(centered, {32, 32}, 2.0);
  REQUIRE(m.shape() == Shape{1, 32, 32});
  CHECK(m(0, 20, 10) == 1.0f);
  CHECK(m(0, 20, 11) == doctest::Approx(std::exp(-1.0 / 8.0)));
  CHECK(m(0, 21, 11) == doctest::Approx(std::exp(-2.0 / 8.0)));
  CHECK(m(0, 0, 31) == 0.0f);
  // Overlapping splats saturate at 1.
  const Keypoint twin[] = {{10.5f, 20.5f}, {11.5f, 20.5f}};
  const Tensor t = rasterize_keypoints(twin, {32, 32}, 2.0);
  CHECK(t(0, 20, 10) == 1.0f);
  CHECK(t(0, 20, 11) == 1.0f);
  for (float v : t.data()) CHECK(v <= 1.0f);
  // Nothing beyond six sigma.
  const Tensor far = rasterize_keypoints(centered, {64, 64}, 1.0);
  CHECK(far(0, 20, 17) == 0.0f);
  CHECK(far(0, 20, 5) > 0.0f);
  const Keypoint outside[] = {{-100.0f, -100.0f}};
  CHECK(rasterize_keypoints(outside, {8, 8}, 1.0).bit_equal(Tensor({1, 8, 8})));
  CHECK_THROWS_AS(rasterize_keypoints(centered, {8, 8}, 0.0), ArgumentError);
}

TEST_CASE("condition sets carry per-frame latents and masks") {
  Rng rng(5);
  ConditionInputs in;
  in.reference = random_tensor({2, 3, 3}, rng);
  in.shading = random_tensor({4, 2, 3, 3}, rng);
  in.audio = random_tensor({4, 2, 3, 3}, rng);
  in.dropout = {true, false, true, true};
  const auto sets = make_condition_sets(in);
  REQUIRE(sets.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(sets[t].mask == BranchMask{true, false, false, true});
    CHECK(sets[t].features[0].shape() == Shape{1, 2, 3, 3});
    CHECK(std::equal(sets[t].features[0].data().begin(), sets[t].features[0].data().end(),
                     in.reference->data().begin()));
    CHECK(std::equal(sets[t].features[3].data().begin(), sets[t].features[3].data().end(),
                     in.audio->data().begin() + t * 18));
  }
  ConditionInputs bad = in;
  bad.motion = random_tensor({3, 2, 3, 3}, rng);
  CHECK_THROWS_AS(make_condition_sets(bad), ShapeError);
  CHECK_THROWS_AS(make_condition_sets(ConditionInputs{}), ArgumentError);
  ConditionInputs ref_only;
  ref_only.reference = in.reference;
  CHECK_THROWS_AS(make_condition_sets(ref_only), ArgumentError);
  ref_only.frames = 2;
  CHECK(make_condition_sets(ref_only).size() == 2);
}

}
