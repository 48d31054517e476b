#include "segslam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "segslam/error.hpp"

namespace segslam {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kZeroDepth: return "ZeroDepth";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kEmptyRegion: return "EmptyRegion";
    case ErrorCode::kEmptyProjection: return "EmptyProjection";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnknownClass: return "UnknownClass";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

void CameraModel::validate() const {
  std::ostringstream why;
  if (!(fx > 0) || !(fy > 0)) why << "focal lengths must be positive; ";
  if (!(depth_factor > 0)) why << "depth_factor must be positive; ";
  if (!(image_scale > 0)) why << "image_scale must be positive; ";
  if (width <= 0 || height <= 0) why << "image size must be positive; ";
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height)) why << "principal point outside image; ";
  if (!why.str().empty()) throw Error(ErrorCode::kInvalidArgument, "camera: " + why.str());
}

double CameraModel::diagonal() const {
  return std::hypot(static_cast<double>(width), static_cast<double>(height));
}

bool CameraModel::contains(const Pixel& px) const {
  return px.u >= 0 && px.v >= 0 && px.u < width && px.v < height;
}

Pose::Pose() : rotation_(Mat3::Identity()), translation_(Point3::Zero()) {}

Pose::Pose(const Mat3& rotation, const Point3& translation)
    : rotation_(rotation), translation_(translation) {
  const double err = orthonormality_error();
  if (!std::isfinite(err) || err > 1e-6 || rotation.determinant() <= 0 || !translation.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "pose rotation is not a proper rotation matrix");
  }
  if (err > 1e-12) rotation_ = orthonormalize(rotation_);
}

double Pose::orthonormality_error() const {
  return (rotation_.transpose() * rotation_ - Mat3::Identity()).norm();
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation_ = a.rotation_ * b.rotation_;
  out.translation_ = a.rotation_ * b.translation_ + a.translation_;
  out.chain_length_ = std::max(a.chain_length_, b.chain_length_) + 1;
  if (out.chain_length_ > kReorthonormalizeAfter) {
    out.rotation_ = orthonormalize(out.rotation_);
    out.chain_length_ = 0;
  }
  return out;
}

Pose invert(const Pose& a) {
  Pose out;
  out.rotation_ = a.rotation_.transpose();
  out.translation_ = -out.rotation_ * a.translation_;
  out.chain_length_ = a.chain_length_;
  return out;
}

Pose relative_pose(const Pose& prev, const Pose& cur) {
  return compose(cur, invert(prev));
}

Mat3 exp_so3(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  Mat3 k;
  k << 0, -omega.z(), omega.y(),
       omega.z(), 0, -omega.x(),
       -omega.y(), omega.x(), 0;
  if (theta < 1e-8) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Eigen::Vector3d log_so3(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(c);
  const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < 1e-8) return 0.5 * w;
  if (std::numbers::pi - theta < 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from R + I.
    const Mat3 b = 0.5 * (r + Mat3::Identity());
    int i = 0;
    b.diagonal().maxCoeff(&i);
    Eigen::Vector3d axis = b.col(i) / std::sqrt(std::max(b(i, i), 1e-300));
    axis.normalize();
    if (axis.dot(w) < 0) axis = -axis;
    return theta * axis;
  }
  return theta / (2.0 * std::sin(theta)) * w;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  return log_so3(a.transpose() * b).norm();
}

Point3 back_project(const CameraModel& cam, const Pixel& px, double raw_depth) {
  if (raw_depth == 0.0) throw Error(ErrorCode::kZeroDepth, "pixel has no depth measurement");
  if (!(raw_depth > 0.0)) throw Error(ErrorCode::kInvalidArgument, "raw depth must be non-negative");
  const double z = raw_depth / cam.depth_factor;
  return {(px.u - cam.cx) * z / cam.fx, (px.v - cam.cy) * z / cam.fy, z};
}

Pixel project(const CameraModel& cam, const Pose& pose, const Point3& p) {
  const Point3 q = pose.apply(p);
  if (!(q.z() > 0.0)) throw Error(ErrorCode::kBehindCamera, "point is not in front of the camera");
  const double w = cam.image_scale * q.z();
  return {(cam.fx * q.x() + cam.cx * q.z()) / w, (cam.fy * q.y() + cam.cy * q.z()) / w};
}

}  // namespace segslam
