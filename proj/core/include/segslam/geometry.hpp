#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace segslam {

using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole intrinsics plus the depth-map conventions of the sensor.
///
/// `depth_factor` converts raw depth units to meters (raw / depth_factor),
/// `image_scale` is the homogeneous divisor applied after the intrinsic
/// matrix during projection.
struct CameraModel {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  double depth_factor = 1000.0;
  double image_scale = 1.0;
  int width = 640;
  int height = 480;

  /// Throws Error(kInvalidArgument) if any invariant is violated.
  void validate() const;

  double diagonal() const;
  bool contains(const Pixel& px) const;
};

/// Rigid transform mapping world coordinates to camera coordinates:
/// p_cam = rotation * p_world + translation.
class Pose {
 public:
  Pose();
  Pose(const Mat3& rotation, const Point3& translation);

  static Pose identity() { return {}; }

  const Mat3& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }

  /// Camera center expressed in world coordinates.
  Point3 center() const { return -rotation_.transpose() * translation_; }

  /// Number of compositions accumulated since the rotation was last
  /// re-orthonormalized.
  int chain_length() const { return chain_length_; }

  /// ‖RᵀR − I‖ (Frobenius).
  double orthonormality_error() const;

 private:
  friend Pose compose(const Pose& a, const Pose& b);
  friend Pose invert(const Pose& a);

  Mat3 rotation_;
  Point3 translation_;
  int chain_length_ = 0;
};

/// Composition chains longer than this are projected back onto SO(3).
inline constexpr int kReorthonormalizeAfter = 100;

/// compose(a, b) applies b first, then a.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);

/// Transform taking previous-camera coordinates to current-camera
/// coordinates given both world-to-camera poses.
Pose relative_pose(const Pose& prev, const Pose& cur);

/// Nearest rotation matrix in the Frobenius sense (SVD projection).
Mat3 orthonormalize(const Mat3& m);

/// Rodrigues exponential map so(3) -> SO(3).
Mat3 exp_so3(const Eigen::Vector3d& omega);
/// Inverse of exp_so3; returned angle in [0, pi].
Eigen::Vector3d log_so3(const Mat3& r);

/// Angle of the rotation taking a to b, in radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Lifts a pixel with raw (sensor unit) depth to a camera-frame point.
/// Throws Error(kZeroDepth) when raw_depth == 0.
Point3 back_project(const CameraModel& cam, const Pixel& px, double raw_depth);

/// Applies `pose` to `p` and projects through the intrinsics, dividing by
/// image_scale * z. Throws Error(kBehindCamera) if the transformed z <= 0.
Pixel project(const CameraModel& cam, const Pose& pose, const Point3& p);

/// Dense raw depth image; 0 marks a missing measurement.
struct DepthGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> raw;

  DepthGrid() = default;
  DepthGrid(int w, int h) : width(w), height(h), raw(static_cast<std::size_t>(w) * h, 0) {}

  std::uint16_t at(int x, int y) const { return raw[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t& at(int x, int y) { return raw[static_cast<std::size_t>(y) * width + x]; }
};

}  // namespace segslam
