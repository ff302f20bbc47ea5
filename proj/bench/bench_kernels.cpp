// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels against their OpenMP counterparts.
// Thread count for the parallel variants is the benchmark argument.
#include <benchmark/benchmark.h>

#include "mctk/fusion.hpp"
#include "mctk/liploss.hpp"
#include "mctk/router.hpp"

namespace {

using namespace mctk;

Tensor noise(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

struct RenderSetup {
  HeadAsset asset = gen_desk_asset(3, 3);
  std::vector<HeadParams> params;

  RenderSetup() {
    for (int t = 0; t < 8; ++t) {
      HeadParams p;
      p.camera = {0.8f, 0.0f, 0.0f};
      p.head_rotation = {0.02f * t, 0.05f * t, 0.0f};
      p.jaw = {0.03f * t, 0.0f, 0.0f};
      for (std::size_t ch = 0; ch < 3; ++ch) p.light[ch * 9] = 2.0f;
      p.light[2] = 0.4f;
      params.push_back(p);
    }
  }
};

const RenderSetup& render_setup() {
  static const RenderSetup s;
  return s;
}

struct RouteSetup {
  Tensor h, t_emb;
  ConditionSet<float> conds;
  RouterConfig<float> cfg = RouterConfig<float>::seeded(8, 1);

  RouteSetup() {
    Rng rng(2);
    h = noise({64, 8, 16, 16}, rng);
    t_emb = noise({8}, rng);
    for (auto& f : conds.features) f = noise({64, 8, 16, 16}, rng);
  }
};

const RouteSetup& route_setup() {
  static const RouteSetup s;
  return s;
}

const Tensor& crop_frames() {
  static const Tensor f = [] {
    Rng rng(3);
    return noise({16, 3, 256, 256}, rng);
  }();
  return f;
}

const MouthBox kBox{60, 120, 200, 230};

void BM_render_serial(benchmark::State& state) {
  const auto& s = render_setup();
  for (auto _ : state) benchmark::DoNotOptimize(render_frames_serial(s.asset, s.params, {256, 256}));
}

void BM_render_parallel(benchmark::State& state) {
  const auto& s = render_setup();
  for (auto _ : state)
    benchmark::DoNotOptimize(render_frames(s.asset, s.params, {256, 256}, static_cast<int>(state.range(0))));
}

void BM_route_serial(benchmark::State& state) {
  const auto& s = route_setup();
  for (auto _ : state) benchmark::DoNotOptimize(route_gates_serial(s.h, s.conds, s.t_emb, s.cfg));
}

void BM_route_parallel(benchmark::State& state) {
  const auto& s = route_setup();
  for (auto _ : state)
    benchmark::DoNotOptimize(route_gates(s.h, s.conds, s.t_emb, s.cfg, static_cast<int>(state.range(0))));
}

void BM_crop_serial(benchmark::State& state) {
  const Tensor& f = crop_frames();
  for (auto _ : state) benchmark::DoNotOptimize(crop_resize_serial(f, kBox));
}

void BM_crop_parallel(benchmark::State& state) {
  const Tensor& f = crop_frames();
  for (auto _ : state)
    benchmark::DoNotOptimize(crop_resize(f, kBox, kLipCropSize, static_cast<int>(state.range(0))));
}

}  // namespace

BENCHMARK(BM_render_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_route_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_route_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_crop_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_crop_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
