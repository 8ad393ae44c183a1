#include <benchmark/benchmark.h>

#include <numbers>

#include "endotrack/sim/scene.hpp"
#include "endotrack/tiplocate/pipeline.hpp"
#include "endotrack/tiplocate/skeleton.hpp"
#include "endotrack/tiplocate/stereo.hpp"

using namespace endotrack;

namespace {

Exec mode(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

geom::CameraIntrinsics camera() {
  return geom::CameraIntrinsics::from_fov(1920, 1080, 80 * std::numbers::pi / 180.0, 0.0016);
}

sim::Scene two_tools() {
  sim::Scene s;
  sim::Instrument a;
  a.side = sim::Side::Left;
  a.pivot = {-0.16, 0.04, 0.02};
  a.tip = {-0.010, 0.004, 0.08};
  sim::Instrument b;
  b.side = sim::Side::Right;
  b.pivot = {0.16, 0.03, 0.03};
  b.tip = {0.012, -0.004, 0.08};
  b.jaw_length = 0.009;
  b.jaw_opening = 20 * std::numbers::pi / 180.0;
  s.instruments = {a, b};
  return s;
}

const sim::StereoFrame& frame() {
  static const sim::StereoFrame f = sim::render_stereo(two_tools(), geom::RigidTransform::identity(), camera());
  return f;
}

void BM_Render(benchmark::State& st) {
  const auto s = two_tools();
  const auto in = camera();
  for (auto _ : st) benchmark::DoNotOptimize(sim::render_stereo(s, geom::RigidTransform::identity(), in, {}, mode(st)));
}

void BM_DistanceTransform(benchmark::State& st) {
  const auto& m = frame().mask_left;
  for (auto _ : st) benchmark::DoNotOptimize(tiplocate::squared_distance_transform(m, mode(st)));
}

void BM_Skeleton(benchmark::State& st) {
  const auto& m = frame().mask_left;
  for (auto _ : st) benchmark::DoNotOptimize(tiplocate::skeletonize(m, mode(st)));
}

void BM_NccProfile(benchmark::State& st) {
  const auto& f = frame();
  const Vec2 tip = f.tips.front().pixel;
  const tiplocate::StereoConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(tiplocate::ncc_profile(f.left, f.right, tip, cfg, mode(st)));
}

void BM_LocalizeFrame(benchmark::State& st) {
  const auto& f = frame();
  const auto geo = tiplocate::ProcessingGeometry::for_image(f.left.width, f.left.height);
  for (auto _ : st)
    benchmark::DoNotOptimize(tiplocate::localize_frame(f.mask_left, f.left, f.right, geo, {}, 0.0, mode(st)));
}

}  // namespace

// Argument 0 = serial reference, 1 = OpenMP.
BENCHMARK(BM_Render)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceTransform)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Skeleton)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NccProfile)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LocalizeFrame)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
