#include <algorithm>

#include <gtest/gtest.h>

#include "segslam/dataset.hpp"
#include "segslam/error.hpp"
#include "segslam/mapping.hpp"
#include "segslam/pipeline.hpp"
#include "scenes.hpp"
#include "unit/support.hpp"

using namespace segslam;
using segslam::testing::TempDir;

namespace {

SceneSpec noise_free_desk(int frames) {
  SceneSpec s = segslam::testing::desk_scene(false, frames);
  s.feature_noise_px = 0.0;
  return s;
}

ClassifiedPoints all_static(const FrameObservation& obs, const FrameSegmentation& seg) {
  ClassifiedPoints p = classify_points(obs, seg);
  for (const auto& [id, idx] : p.per_instance) p.motion_state[id] = MotionState::kStatic;
  return p;
}

MapPoint point_at(double x, Provenance prov) {
  MapPoint p;
  p.position = Point3(x, 0, 2);
  p.descriptor = Descriptor(32, static_cast<std::uint8_t>(x * 10));
  p.provenance = prov;
  return p;
}

}  // namespace

TEST(MapPointStore, MergesWithinRadius) {
  MapPointStore s(0.01);
  EXPECT_TRUE(s.merge_or_insert(point_at(0, Provenance::kBackground)).second);
  const auto [idx, inserted] = s.merge_or_insert(point_at(0.005, Provenance::kBackground));
  EXPECT_FALSE(inserted);
  EXPECT_EQ(idx, 0u);
  EXPECT_EQ(s[0].observation_count, 2u);
  EXPECT_TRUE(s.merge_or_insert(point_at(0.02, Provenance::kBackground)).second);
  EXPECT_EQ(s.nearest_within(Point3(0.019, 0, 2), 0.005), std::optional<std::size_t>(1));
  EXPECT_FALSE(s.nearest_within(Point3(0.5, 0, 2), 0.005));
}

TEST(UpdateTrackingMap, RepeatedKeyframeAddsNothing) {
  const GroundTruthBundle b = generate(noise_free_desk(2));
  TrackingMap map;
  const auto pts = all_static(b.observations[0], b.segmentations[0]);
  update_tracking_map(map, b.observations[0], pts, b.trajectory.poses[0].pose, b.cam);
  const std::size_t n = map.size();
  ASSERT_GT(n, 0u);
  std::vector<std::uint32_t> before;
  for (const auto& p : map.store.points()) before.push_back(p.observation_count);
  update_tracking_map(map, b.observations[0], pts, b.trajectory.poses[0].pose, b.cam);
  EXPECT_EQ(map.size(), n);
  // A point that absorbed k features on the first pass absorbs the same k again.
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(map.store[i].observation_count, 2 * before[i]);
}

TEST(UpdateTrackingMap, MovingInstanceContributesNoPoints) {
  const GroundTruthBundle b = generate(noise_free_desk(2));
  auto pts = all_static(b.observations[0], b.segmentations[0]);
  pts.motion_state[0] = MotionState::kMoving;
  TrackingMap map;
  update_tracking_map(map, b.observations[0], pts, b.trajectory.poses[0].pose, b.cam);
  const auto& obs = b.observations[0];
  for (const auto& p : map.store.points()) {
    for (const std::size_t fi : pts.per_instance.at(0)) {
      const Point3 w = invert(b.trajectory.poses[0].pose).apply(back_project(b.cam, obs.features[fi].pixel, obs.features[fi].raw_depth));
      EXPECT_GT((p.position - w).norm(), 1e-9);
    }
  }
  std::size_t statics = 0;
  for (const auto& p : map.store.points()) statics += p.provenance == Provenance::kStaticInstance;
  EXPECT_GT(statics, 0u);
  EXPECT_LE(statics, pts.per_instance.at(1).size() + pts.per_instance.at(2).size());
}

TEST(UpdateTrackingMap, NoiseFreePointsMatchLandmarks) {
  const GroundTruthBundle b = generate(noise_free_desk(12));
  TrackingMap map;
  for (const std::size_t f : {std::size_t{0}, std::size_t{11}}) {
    update_tracking_map(map, b.observations[f], all_static(b.observations[f], b.segmentations[f]),
                        b.trajectory.poses[f].pose, b.cam);
  }
  const auto& landmarks = b.landmark_positions[0];
  for (const auto& p : map.store.points()) {
    double best = 1e9;
    for (const auto& l : landmarks) best = std::min(best, (l - p.position).norm());
    EXPECT_LT(best, 1e-6);
  }
}

TEST(UpdateTrackingMap, GrowthIsMonotoneAndDeduplicated) {
  const GroundTruthBundle b = generate(segslam::testing::desk_scene(false, 30));
  TrackingMap map;
  std::size_t last = 0;
  for (std::size_t f = 0; f < b.n_frames(); f += 5) {
    update_tracking_map(map, b.observations[f], all_static(b.observations[f], b.segmentations[f]),
                        b.trajectory.poses[f].pose, b.cam);
    EXPECT_GE(map.size(), last);
    last = map.size();
  }
  const auto pts = map.store.points();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      ASSERT_GE((pts[i].position - pts[j].position).norm(), map.store.merge_radius());
}

TEST(LongTermMap, BackgroundOnlyMapIsCopied) {
  TrackingMap tm;
  for (int i = 0; i < 5; ++i) tm.store.merge_or_insert(point_at(i, Provenance::kBackground));
  LongTermMap ltm;
  EXPECT_EQ(update_long_term_map(ltm, tm), 5u);
  ASSERT_EQ(ltm.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(ltm.points()[i].position, tm.store[i].position);
  EXPECT_EQ(update_long_term_map(ltm, tm), 0u);
}

TEST(LongTermMap, IncrementalSyncMatchesFullSync) {
  const GroundTruthBundle b = generate(segslam::testing::desk_scene(true, 30));
  TrackingMap tm;
  LongTermMap full, incremental;
  std::size_t synced = 0;
  for (std::size_t f = 0; f < b.n_frames(); f += 5) {
    update_tracking_map(tm, b.observations[f], all_static(b.observations[f], b.segmentations[f]),
                        b.trajectory.poses[f].pose, b.cam);
    update_long_term_map(full, tm);
    update_long_term_map(incremental, tm, synced);
    synced = tm.store.size();
  }
  ASSERT_EQ(incremental.size(), full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    EXPECT_EQ(incremental.points()[i].position, full.points()[i].position);
  }
  EXPECT_EQ(update_long_term_map(incremental, tm, tm.store.size()), 0u);
}

TEST(LongTermMap, StaticInstancePointsAreIgnored) {
  TrackingMap tm;
  for (int i = 0; i < 5; ++i) tm.store.merge_or_insert(point_at(i, Provenance::kStaticInstance));
  LongTermMap ltm;
  EXPECT_EQ(update_long_term_map(ltm, tm), 0u);
  EXPECT_EQ(ltm.size(), 0u);
  EXPECT_THROW(ltm.insert(point_at(9, Provenance::kStaticInstance)), Error);
}

TEST(LongTermMap, MixedMapKeepsBackgroundCount) {
  const GroundTruthBundle b = generate(segslam::testing::desk_scene(false, 20));
  TrackingMap tm;
  LongTermMap ltm;
  for (std::size_t f = 0; f < b.n_frames(); f += 5) {
    update_tracking_map(tm, b.observations[f], all_static(b.observations[f], b.segmentations[f]),
                        b.trajectory.poses[f].pose, b.cam);
    update_long_term_map(ltm, tm);
    EXPECT_EQ(ltm.impurity_count(), 0u);
    for (const auto& p : ltm.points()) ASSERT_EQ(p.provenance, Provenance::kBackground);
  }
  std::size_t background = 0;
  for (const auto& p : tm.store.points()) background += p.provenance == Provenance::kBackground;
  EXPECT_EQ(ltm.size(), background);
}

TEST(Relocalize, EmptyMapIsDegenerate) {
  const GroundTruthBundle b = generate(noise_free_desk(2));
  try {
    relocalize(MapPointStore{}, b.observations[0], b.cam, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
}

TEST(Relocalize, UnchangedSceneIsExact) {
  const GroundTruthBundle b = generate(noise_free_desk(40));
  PipelineConfig cfg;
  cfg.corruption.enabled = false;
  const BundleSource src(b);
  const PipelineResult first = run_pipeline(src, cfg);
  cfg.mode = PipelineMode::kSecondPass;
  const PipelineResult second = run_pipeline(src, cfg, &first.long_term_map.store());
  EXPECT_TRUE(second.lost_frames.empty());
  EXPECT_LT(ate(second.trajectory, b.trajectory).rmse, 1e-6);
}

TEST(Relocalize, LongTermMapBeatsTrackingMapAfterRelocation) {
  const SceneSpec spec = segslam::testing::revisit_scene(60);
  const GroundTruthBundle pass1 = generate(spec);
  const GroundTruthBundle pass2 = second_pass(spec);
  PipelineConfig cfg;
  const PipelineResult first = run_pipeline(BundleSource(pass1), cfg);
  cfg.mode = PipelineMode::kSecondPass;
  const BundleSource src2(pass2);
  const double with_ltm = ate(run_pipeline(src2, cfg, &first.long_term_map.store()).trajectory, pass2.trajectory).rmse;
  const double with_tm = ate(run_pipeline(src2, cfg, &first.tracking_map.store).trajectory, pass2.trajectory).rmse;
  EXPECT_LT(with_ltm, with_tm);
}

TEST(MapFile, RoundTrip) {
  TempDir dir;
  MapPointStore s;
  for (int i = 0; i < 20; ++i) {
    MapPoint p = point_at(0.1 * i + 1e-13, i % 3 ? Provenance::kBackground : Provenance::kStaticInstance);
    p.observation_count = static_cast<std::uint32_t>(i + 1);
    s.merge_or_insert(p);
  }
  save_map(dir.path() / "m.map", s);
  const MapPointStore back = load_map(dir.path() / "m.map");
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].position, s[i].position);
    EXPECT_EQ(back[i].descriptor, s[i].descriptor);
    EXPECT_EQ(back[i].provenance, s[i].provenance);
    EXPECT_EQ(back[i].observation_count, s[i].observation_count);
  }
  EXPECT_THROW(load_long_term_map(dir.path() / "m.map"), Error);
  EXPECT_THROW(load_map(dir.path() / "missing.map"), Error);
}
