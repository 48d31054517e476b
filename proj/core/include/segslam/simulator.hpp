#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "segslam/evaluation.hpp"
#include "segslam/geometry.hpp"
#include "segslam/observation.hpp"
#include "segslam/segmentation.hpp"

namespace segslam {

enum class ObjectMotion { kStatic, kLinearVelocity, kRelocatedBetweenPasses };

/// Axis-aligned box whose surface carries the object's landmarks.
struct ObjectSpec {
  int class_id = 1;
  Point3 center = Point3::Zero();
  Point3 extents = Point3::Ones();  // full side lengths, m
  int surface_point_count = 200;
  ObjectMotion motion = ObjectMotion::kStatic;
  Point3 velocity = Point3::Zero();          // m/s, kLinearVelocity
  Point3 relocated_center = Point3::Zero();  // second-pass center, kRelocatedBetweenPasses
};

/// Camera centers on a horizontal circular arc around `target`, always
/// looking at it. Angle 0 puts the camera at target - radius * z.
struct ArcTrajectory {
  Point3 target{0.0, 0.0, 3.0};
  double radius = 3.0;
  double start_angle = -0.2;  // rad
  double end_angle = 0.2;
  double bob = 0.0;           // vertical oscillation amplitude, m
};

struct SceneSpec {
  std::uint64_t seed = 1;        // layout: landmarks, descriptors
  std::uint64_t noise_seed = 0;  // measurement noise; 0 means "same as seed"
  int n_background_points = 1000;
  Point3 background_min{-3.0, -1.5, 3.5};
  Point3 background_max{3.0, 1.5, 6.0};
  std::vector<ObjectSpec> objects;
  ClassTable classes;
  /// Explicit camera poses, one per frame; when empty the arc is used.
  std::vector<Pose> trajectory;
  ArcTrajectory arc;
  CameraModel cam;
  int n_frames = 100;
  double fps = 30.0;
  double feature_noise_px = 0.0;
  double depth_noise = 0.0;  // m
  int descriptor_bytes = 32;
  /// Rigid displacement of the camera path in the second pass (world frame).
  Pose second_pass_offset;

  /// Throws kInvalidSpec.
  void validate() const;
};

/// Everything the simulator knows about a sequence.
struct GroundTruthBundle {
  CameraModel cam;
  ClassTable classes;
  std::vector<FrameObservation> observations;
  std::vector<FrameSegmentation> segmentations;  // perfect masks
  Trajectory trajectory;                         // true camera poses
  /// landmark_positions[frame][id] in world coordinates.
  std::vector<std::vector<Point3>> landmark_positions;
  /// Owning object index per landmark id, -1 for background.
  std::vector<int> landmark_object;

  std::size_t n_frames() const { return observations.size(); }
};

/// Camera pose of frame `i` (explicit list or arc).
Pose camera_pose(const SceneSpec& spec, int frame);

/// Deterministic in (seed, noise_seed). Masks come from ray casting the
/// boxes; features are landmarks that land inside the image, are not
/// hidden behind a nearer box, and win their pixel against other landmarks.
GroundTruthBundle generate(const SceneSpec& spec);

/// Same landmarks and descriptors, relocated objects moved to their new
/// centers, and the camera path displaced by second_pass_offset. Throws
/// kInvalidSpec if no object is relocated between passes.
GroundTruthBundle second_pass(const SceneSpec& spec);

}  // namespace segslam
