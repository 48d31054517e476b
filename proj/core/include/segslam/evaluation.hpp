#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "segslam/geometry.hpp"
#include "segslam/segmentation.hpp"

namespace segslam {

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;  // world -> camera
};

struct Trajectory {
  std::vector<StampedPose> poses;

  /// Throws kInvalidArgument unless timestamps strictly increase.
  void validate() const;
  bool empty() const { return poses.empty(); }
  std::size_t size() const { return poses.size(); }
};

/// TUM format, one `timestamp tx ty tz qx qy qz qw` line per pose, giving the
/// camera-to-world transform. Conversion to and from the world-to-camera
/// Pose happens on read/write.
Trajectory read_tum_trajectory(const std::filesystem::path& path);
void write_tum_trajectory(const std::filesystem::path& path, const Trajectory& traj);

inline constexpr double kAssociationWindow = 0.02;  // s

struct PositionPair {
  Point3 estimated;
  Point3 reference;
};

/// One-to-one nearest-timestamp association of camera centers within
/// `max_dt` seconds.
std::vector<PositionPair> associate_positions(const Trajectory& est, const Trajectory& gt,
                                              double max_dt = kAssociationWindow);

/// Rigid transform S minimising sum |S(est_center) - gt_center|^2 (no scale).
/// Throws kInsufficientOverlap with fewer than 3 associated pairs.
Pose align_umeyama(const Trajectory& est, const Trajectory& gt);

/// Translational RMSE of the associated camera centers without alignment.
double unaligned_rmse(const Trajectory& est, const Trajectory& gt);

struct AteReport {
  double rmse = 0.0;     // single run: its RMSE; several runs: the median run RMSE
  double median = 0.0;   // over runs
  double min = 0.0;
  double max = 0.0;
  std::vector<double> run_rmse;
  std::vector<double> per_frame_errors;  // of the first run
};

/// Absolute trajectory error after rigid alignment.
AteReport ate(const Trajectory& est, const Trajectory& gt);
/// Aggregates several runs against one ground truth. Throws
/// kInvalidArgument for an empty run list.
AteReport ate(std::span<const Trajectory> runs, const Trajectory& gt);

double median_of(std::vector<double> values);

struct ClassScore {
  double iou = 0.0;
  double ap50 = 0.0;
  std::size_t gt_instances = 0;
};

struct SegReport {
  double miou = 0.0;
  double map50 = 0.0;
  std::map<int, ClassScore> per_class;
};

/// Per class, IoU of the class masks accumulated over all frames; averaged
/// over classes present in the ground truth.
double miou(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt);

/// Instance AP at IoU 0.5 per class (greedy matching in descending
/// confidence, all-point interpolated precision/recall area), averaged over
/// classes present in the ground truth.
double map50(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt);

SegReport evaluate_segmentation(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt);

}  // namespace segslam
