#include <benchmark/benchmark.h>

#include <vector>

#include "segslam/pipeline.hpp"
#include "segslam/random.hpp"
#include "segslam/segmentation.hpp"
#include "segslam/simulator.hpp"
#include "segslam/tracking.hpp"
#include "scenes.hpp"

using namespace segslam;

namespace {

const GroundTruthBundle& desk() {
  static const GroundTruthBundle b = generate(segslam::testing::desk_scene(true, 20));
  return b;
}

void BM_EstimatePose(benchmark::State& state) {
  Rng rng(3);
  CameraModel cam;
  const Pose truth(exp_so3(Point3(0.05, -0.02, 0.03)), Point3(0.1, 0.0, -0.05));
  const Pose to_world = invert(truth);
  std::vector<Correspondence> corr;
  for (int i = 0; i < state.range(0); ++i) {
    const Pixel px{rng.uniform(0, cam.width - 1), rng.uniform(0, cam.height - 1)};
    const Point3 w = to_world.apply(back_project(cam, px, rng.uniform(800, 6000)));
    Pixel obs = project(cam, truth, w);
    obs.u += rng.normal(0, 0.5);
    obs.v += rng.normal(0, 0.5);
    corr.push_back({w, obs});
  }
  for (auto _ : state) benchmark::DoNotOptimize(estimate_pose(corr, cam, Pose::identity(), {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimatePose)->Arg(50)->Arg(200)->Arg(800);

void BM_ProjectRegion(benchmark::State& state) {
  const auto& b = desk();
  const auto& regions = b.segmentations[0].regions;
  const Pose rel = relative_pose(b.trajectory.poses[0].pose, b.trajectory.poses[1].pose);
  for (auto _ : state) {
    for (const auto& r : regions) benchmark::DoNotOptimize(project_region(r, b.observations[0].depth, b.cam, rel));
  }
}
BENCHMARK(BM_ProjectRegion);

void BM_Refine(benchmark::State& state) {
  const auto& b = desk();
  const FrameSegmentation coarse = corrupt(b.segmentations[1], 0.2, 0.1, 9);
  const Pose rel = relative_pose(b.trajectory.poses[0].pose, b.trajectory.poses[1].pose);
  for (auto _ : state) {
    benchmark::DoNotOptimize(refine(b.segmentations[0], b.observations[0].depth, coarse, rel, b.cam, {}));
  }
}
BENCHMARK(BM_Refine);

void BM_Generate(benchmark::State& state) {
  const SceneSpec spec = segslam::testing::desk_scene(true, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(generate(spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Generate)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_PipelineFrame(benchmark::State& state) {
  const auto& b = desk();
  const BundleSource src(b);
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(src, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.n_frames()));
}
BENCHMARK(BM_PipelineFrame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
