#include <cmath>

#include <gtest/gtest.h>

#include "segslam/error.hpp"
#include "segslam/evaluation.hpp"
#include "unit/support.hpp"

using namespace segslam;
using segslam::testing::oracle;
using segslam::testing::random_pose;
using segslam::testing::TempDir;

namespace {

Trajectory random_walk(Rng& rng, int n) {
  Trajectory t;
  Point3 c = Point3::Zero();
  for (int i = 0; i < n; ++i) {
    c += Point3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
    const Mat3 r = exp_so3(Point3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3)));
    t.poses.push_back({i / 30.0, Pose(r, -r * c)});
  }
  return t;
}

// Moves every camera center by `s` in the world: est = S * gt.
Trajectory transformed(const Trajectory& t, const Pose& s) {
  Trajectory out = t;
  for (auto& p : out.poses) p.pose = compose(p.pose, invert(s));
  return out;
}

Trajectory from_centers(const std::vector<Point3>& centers) {
  Trajectory t;
  for (std::size_t i = 0; i < centers.size(); ++i) t.poses.push_back({i / 30.0, Pose(Mat3::Identity(), -centers[i])});
  return t;
}

SegmentedRegion square(int id, int cls, int x0, int y0, int side, int w = 64, int h = 48) {
  SegmentedRegion r;
  r.instance_id = id;
  r.class_id = cls;
  r.mask = BinaryMask(w, h);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) r.mask.set(x, y);
  return r;
}

}  // namespace

TEST(Umeyama, IdentityForEqualTrajectories) {
  Rng rng(101);
  const Trajectory t = random_walk(rng, 50);
  const Pose s = align_umeyama(t, t);
  EXPECT_LT((s.rotation() - Mat3::Identity()).norm(), 1e-9);
  EXPECT_LT(s.translation().norm(), 1e-9);
}

TEST(Umeyama, RecoversRigidTransform) {
  Rng rng(103);
  const Trajectory gt = random_walk(rng, 50);
  const Pose s = random_pose(rng, 2.0, 3.0);
  const Trajectory est = transformed(gt, s);
  const Pose back = align_umeyama(est, gt);
  EXPECT_LT((compose(back, s).rotation() - Mat3::Identity()).norm(), 1e-9);
  EXPECT_LT(compose(back, s).translation().norm(), 1e-9);
  EXPECT_LT(ate(est, gt).rmse, 1e-9);
}

TEST(Umeyama, NeverWorseThanUnaligned) {
  Rng rng(107);
  for (int i = 0; i < 100; ++i) {
    const Trajectory a = random_walk(rng, 30), b = random_walk(rng, 30);
    EXPECT_LE(ate(a, b).rmse, unaligned_rmse(a, b) + 1e-12);
  }
}

TEST(Umeyama, TooFewPairsThrows) {
  Rng rng(109);
  const Trajectory t = random_walk(rng, 2);
  try {
    align_umeyama(t, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientOverlap);
  }
}

TEST(Ate, MatchesNumpyOracle) {
  const auto& o = oracle()["umeyama"];
  std::vector<Point3> est, gt;
  for (const auto& p : o["est"]) est.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  for (const auto& p : o["gt"]) gt.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  const AteReport r = ate(from_centers(est), from_centers(gt));
  EXPECT_NEAR(r.rmse, o["rmse"].get<double>(), 1e-12);
  ASSERT_EQ(r.per_frame_errors.size(), o["per_frame"].size());
  for (std::size_t i = 0; i < r.per_frame_errors.size(); ++i) {
    EXPECT_NEAR(r.per_frame_errors[i], o["per_frame"][i].get<double>(), 1e-12);
  }
}

TEST(Ate, ZeroForIdenticalAndShifted) {
  Rng rng(113);
  const Trajectory gt = random_walk(rng, 40);
  EXPECT_LT(ate(gt, gt).rmse, 1e-12);
  EXPECT_LT(ate(transformed(gt, Pose(Mat3::Identity(), {0.3, -1, 2})), gt).rmse, 1e-9);
}

TEST(Ate, SingleFrameErrorMatchesOracle) {
  std::vector<Point3> centers;
  for (int i = 0; i < 100; ++i) centers.emplace_back(0.05 * i, std::sin(0.1 * i), 0.02 * i * i / 100.0);
  std::vector<Point3> est = centers;
  est[37].x() += 0.1;
  const double want = oracle()["rmse_single_frame_error"].get<double>();
  EXPECT_NEAR(unaligned_rmse(from_centers(est), from_centers(centers)), want, 1e-12);
  EXPECT_LE(ate(from_centers(est), from_centers(centers)).rmse, want + 1e-12);
}

TEST(Ate, InvariantUnderRigidTransformOfEstimate) {
  Rng rng(127);
  const Trajectory gt = random_walk(rng, 40), est = random_walk(rng, 40);
  const double base = ate(est, gt).rmse;
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(ate(transformed(est, random_pose(rng, 3.0, 5.0)), gt).rmse, base, 1e-9);
  }
}

TEST(Ate, RunAggregationIsOrdered) {
  Rng rng(131);
  const Trajectory gt = random_walk(rng, 30);
  for (int n = 1; n <= 10; ++n) {
    std::vector<Trajectory> runs;
    for (int i = 0; i < n; ++i) runs.push_back(random_walk(rng, 30));
    const AteReport r = ate(runs, gt);
    EXPECT_LE(r.min, r.median);
    EXPECT_LE(r.median, r.max);
    EXPECT_EQ(r.run_rmse.size(), static_cast<std::size_t>(n));
    if (n == 1) {
      EXPECT_EQ(r.min, r.max);
      EXPECT_EQ(r.median, r.min);
    }
  }
  EXPECT_THROW(ate(std::vector<Trajectory>{}, gt), Error);
}

TEST(Ate, AssociatesByTimestamp) {
  Rng rng(137);
  const Trajectory gt = random_walk(rng, 20);
  Trajectory est = gt;
  est.poses.erase(est.poses.begin() + 5);
  for (auto& p : est.poses) p.timestamp += 0.005;
  EXPECT_EQ(associate_positions(est, gt).size(), 19u);
  EXPECT_LT(ate(est, gt).rmse, 1e-12);
}

TEST(MedianOf, EvenAndOdd) {
  EXPECT_EQ(median_of({3, 1, 2}), 2);
  EXPECT_EQ(median_of({4, 1, 3, 2}), 2.5);
}

TEST(Miou, PerfectAndEmpty) {
  FrameSegmentation gt(0, 64, 48);
  gt.regions.push_back(square(1, 1, 0, 0, 10));
  gt.regions.push_back(square(2, 2, 20, 20, 8));
  const std::vector<FrameSegmentation> g{gt};
  EXPECT_DOUBLE_EQ(miou(g, g), 1.0);
  const std::vector<FrameSegmentation> none{FrameSegmentation(0, 64, 48)};
  EXPECT_DOUBLE_EQ(miou(none, g), 0.0);
}

TEST(Miou, HalfOverlapMatchesOracle) {
  FrameSegmentation gt(0, 640, 480), pred(0, 640, 480);
  gt.regions.push_back(square(1, 1, 0, 0, 20, 640, 480));
  pred.regions.push_back(square(1, 1, 10, 0, 20, 640, 480));
  const std::vector<FrameSegmentation> g{gt}, p{pred};
  EXPECT_NEAR(miou(p, g), oracle()["iou_half_overlap"].get<double>(), 1e-12);
}

TEST(Map50, PerfectEmptyAndHalfRecall) {
  FrameSegmentation gt(0, 64, 48);
  gt.regions.push_back(square(1, 1, 0, 0, 10));
  gt.regions.push_back(square(2, 1, 30, 20, 10));
  const std::vector<FrameSegmentation> g{gt};
  EXPECT_DOUBLE_EQ(map50(g, g), 1.0);
  const std::vector<FrameSegmentation> none{FrameSegmentation(0, 64, 48)};
  EXPECT_DOUBLE_EQ(map50(none, g), 0.0);
  FrameSegmentation half(0, 64, 48);
  half.regions.push_back(square(7, 1, 0, 0, 10));
  const std::vector<FrameSegmentation> h{half};
  EXPECT_NEAR(map50(h, g), oracle()["ap_one_of_two"].get<double>(), 1e-12);
}

TEST(SegMetrics, MonotoneAsErrorShrinks) {
  FrameSegmentation gt(0, 64, 48);
  gt.regions.push_back(square(1, 1, 10, 10, 12));
  gt.regions.push_back(square(2, 2, 35, 15, 10));
  const std::vector<FrameSegmentation> g{gt};
  double last_miou = -1, last_map = -1;
  // Nested wrong-pixel sets: a dilation ring that shrinks to nothing.
  for (int r = 6; r >= 0; --r) {
    FrameSegmentation pred = gt;
    BinaryMask ring = gt.regions[0].mask.dilated(r);
    ring.subtract(gt.regions[1].mask);
    pred.regions[0].mask = ring;
    const std::vector<FrameSegmentation> p{pred};
    const SegReport rep = evaluate_segmentation(p, g);
    EXPECT_GE(rep.miou, last_miou);
    EXPECT_GE(rep.map50, last_map);
    last_miou = rep.miou;
    last_map = rep.map50;
  }
  EXPECT_DOUBLE_EQ(last_miou, 1.0);
  EXPECT_DOUBLE_EQ(last_map, 1.0);
}

TEST(TumIo, RoundTrip) {
  TempDir dir;
  Rng rng(139);
  const Trajectory t = random_walk(rng, 25);
  write_tum_trajectory(dir.path() / "t.txt", t);
  const Trajectory back = read_tum_trajectory(dir.path() / "t.txt");
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(back.poses[i].timestamp, t.poses[i].timestamp, 1e-9);
    EXPECT_LT((back.poses[i].pose.rotation() - t.poses[i].pose.rotation()).norm(), 1e-9);
    EXPECT_LT((back.poses[i].pose.translation() - t.poses[i].pose.translation()).norm(), 1e-9);
  }
  EXPECT_THROW(read_tum_trajectory(dir.path() / "missing.txt"), Error);
}
