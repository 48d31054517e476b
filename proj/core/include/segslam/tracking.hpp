#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "segslam/config.hpp"
#include "segslam/geometry.hpp"
#include "segslam/landmark_map.hpp"
#include "segslam/observation.hpp"
#include "segslam/segmentation.hpp"

namespace segslam {

struct TrackingConfig {
  double match_dist_3d = 0.05;       // m; a point closer than this to its map match is static
  double moving_fraction = 0.2;      // instance is moving at or above this fraction of moving points
  double huber_delta = 2.0;          // px
  int max_iterations = 20;
  double convergence_tol = 1e-8;     // absolute cost decrease
  double pixel_match_radius = 8.0;   // px; map association gate for motion judgment and fine tracking
  double search_radius = 24.0;       // px; association gate around the motion-model prediction
  int max_descriptor_distance = 64;  // bits
  double outlier_gate_px = 6.0;      // coarse tracking drops residuals above this and re-solves
  double min_support_fraction = 0.1; // an instance with fewer matched features than this share is moving

  void validate() const;
};

TrackingConfig tracking_config_from(const KeyValueConfig& cfg, const TrackingConfig& defaults = {});
void write_tracking_config(std::ostream& os, const TrackingConfig& cfg);

enum class MotionState { kStatic, kMoving };

/// Partition of a frame's depth-valid features into the background set and
/// one set per segmented instance, plus the per-instance motion verdict.
struct ClassifiedPoints {
  std::vector<std::size_t> background;
  std::map<int, std::vector<std::size_t>> per_instance;
  std::map<int, MotionState> motion_state;
  std::map<int, int> instance_class;

  bool is_static(int instance_id) const;
  /// Background features followed by the features of static instances.
  std::vector<std::size_t> static_features() const;
};

struct Correspondence {
  Point3 world;
  Pixel observed;
};

struct PoseEstimate {
  Pose pose;
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
  /// Cost after every accepted iteration, starting with the initial cost.
  std::vector<double> cost_history;
};

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Sum over correspondences of the Huber loss of the 2D reprojection error
/// norm. Points behind the camera contribute a constant penalty.
double reprojection_cost(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& pose,
                         double huber_delta);

/// Gradient of reprojection_cost with respect to a left increment
/// (rotation vector, translation) applied through apply_increment.
Vector6d reprojection_gradient(std::span<const Correspondence> corr, const CameraModel& cam,
                               const Pose& pose, double huber_delta);

/// R <- exp(w) R, T <- exp(w) T + v for xi = (w, v).
Pose apply_increment(const Pose& pose, const Vector6d& xi);

/// Robust Gauss-Newton (iteratively reweighted) minimisation of the
/// reprojection error. Steps that would raise the cost are halved, and the
/// loop stops once an accepted step lowers the cost by less than
/// cfg.convergence_tol. Throws kDegenerate for fewer than 6
/// correspondences or a singular normal matrix.
PoseEstimate estimate_pose(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& initial,
                           const TrackingConfig& cfg);

/// Outlier-gated estimate_pose: correspondences whose reprojection error
/// at the initial pose exceeds max(cfg.outlier_gate_px, 3 x median error)
/// are dropped before solving, and the same gate is re-applied after each
/// solve for up to `rounds` further solves. A gate that would leave fewer
/// than 6 correspondences is skipped.
PoseEstimate estimate_pose_gated(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& initial,
                                 const TrackingConfig& cfg, int rounds = 2);

/// Assigns depth-valid features to instance sets by mask membership, the
/// rest to the background set.
ClassifiedPoints classify_points(const FrameObservation& obs, const FrameSegmentation& seg);

struct FeatureMatch {
  std::size_t feature = 0;
  std::size_t map_point = 0;
};

/// For each listed feature: the map point whose projection under `pose` lies
/// within `radius` px, preferring the smallest descriptor distance (at most
/// cfg.max_descriptor_distance), then the nearest projection, then the
/// oldest point.
std::vector<FeatureMatch> associate(const FrameObservation& obs, std::span<const std::size_t> features,
                                    const MapPointStore& map, const CameraModel& cam, const Pose& pose,
                                    double radius, const TrackingConfig& cfg);

/// Votes each instance static or moving by comparing its features, lifted
/// to the world with the coarse pose, against their tracking-map matches.
/// Instances without any matched feature are marked moving.
ClassifiedPoints judge_motion(const ClassifiedPoints& points, const FrameObservation& obs, const Pose& coarse,
                              const TrackingMap& map, const CameraModel& cam, const TrackingConfig& cfg);

/// Matches used by fine_track: background and static-instance features
/// associated with the tracking map around the coarse pose.
std::vector<FeatureMatch> fine_track_matches(const FrameObservation& obs, const ClassifiedPoints& points,
                                             const TrackingMap& map, const CameraModel& cam, const Pose& coarse,
                                             const TrackingConfig& cfg);

/// Gated pose estimate over fine_track_matches, starting at `coarse`.
Pose fine_track(const FrameObservation& obs, const ClassifiedPoints& points, const TrackingMap& map,
                const CameraModel& cam, const Pose& coarse, const TrackingConfig& cfg);

/// Builds 2D-3D correspondences from feature/map-point matches.
std::vector<Correspondence> to_correspondences(const FrameObservation& obs, std::span<const FeatureMatch> matches,
                                               const MapPointStore& map);

}  // namespace segslam
