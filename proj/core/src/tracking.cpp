#include "segslam/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "segslam/error.hpp"

namespace segslam {

void TrackingConfig::validate() const {
  if (!(match_dist_3d > 0) || !(moving_fraction > 0) || !(moving_fraction <= 1) || !(huber_delta > 0) ||
      max_iterations <= 0 || !(convergence_tol > 0) || !(pixel_match_radius > 0) || !(search_radius > 0) ||
      max_descriptor_distance < 0 || !(outlier_gate_px > 0) ||
      !(min_support_fraction >= 0) || !(min_support_fraction <= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "tracking thresholds must be positive and moving_fraction <= 1");
  }
}

TrackingConfig tracking_config_from(const KeyValueConfig& cfg, const TrackingConfig& defaults) {
  TrackingConfig out = defaults;
  out.match_dist_3d = cfg.get_double("match_dist_3d", out.match_dist_3d);
  out.moving_fraction = cfg.get_double("moving_fraction", out.moving_fraction);
  out.huber_delta = cfg.get_double("huber_delta", out.huber_delta);
  out.max_iterations = cfg.get_int("max_iterations", out.max_iterations);
  out.convergence_tol = cfg.get_double("convergence_tol", out.convergence_tol);
  out.pixel_match_radius = cfg.get_double("pixel_match_radius", out.pixel_match_radius);
  out.search_radius = cfg.get_double("search_radius", out.search_radius);
  out.max_descriptor_distance = cfg.get_int("max_descriptor_distance", out.max_descriptor_distance);
  out.outlier_gate_px = cfg.get_double("outlier_gate_px", out.outlier_gate_px);
  out.min_support_fraction = cfg.get_double("min_support_fraction", out.min_support_fraction);
  out.validate();
  return out;
}

void write_tracking_config(std::ostream& os, const TrackingConfig& cfg) {
  os << std::setprecision(17);
  os << "match_dist_3d = " << cfg.match_dist_3d << "\n"
     << "moving_fraction = " << cfg.moving_fraction << "\n"
     << "huber_delta = " << cfg.huber_delta << "\n"
     << "max_iterations = " << cfg.max_iterations << "\n"
     << "convergence_tol = " << cfg.convergence_tol << "\n"
     << "pixel_match_radius = " << cfg.pixel_match_radius << "\n"
     << "search_radius = " << cfg.search_radius << "\n"
     << "max_descriptor_distance = " << cfg.max_descriptor_distance << "\n"
     << "outlier_gate_px = " << cfg.outlier_gate_px << "\n"
     << "min_support_fraction = " << cfg.min_support_fraction << "\n";
}

bool ClassifiedPoints::is_static(int instance_id) const {
  const auto it = motion_state.find(instance_id);
  return it != motion_state.end() && it->second == MotionState::kStatic;
}

std::vector<std::size_t> ClassifiedPoints::static_features() const {
  std::vector<std::size_t> out = background;
  for (const auto& [id, idx] : per_instance) {
    if (is_static(id)) out.insert(out.end(), idx.begin(), idx.end());
  }
  return out;
}

namespace {

// Error (in px) charged to a point that falls behind the camera.
constexpr double kBehindPenaltyPx = 1e3;

double huber(double r, double delta) {
  return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

struct Linearization {
  Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
  Vector6d gradient = Vector6d::Zero();
};

Linearization linearize(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& pose,
                        double delta) {
  Linearization lin;
  const Mat3& rot = pose.rotation();
  const Point3& t = pose.translation();
  for (const auto& c : corr) {
    const Point3 q = rot * c.world + t;
    if (!(q.z() > 0.0)) continue;
    const double iz = 1.0 / q.z();
    const double s = cam.image_scale;
    const Eigen::Vector2d res((cam.fx * q.x() * iz + cam.cx) / s - c.observed.u,
                              (cam.fy * q.y() * iz + cam.cy) / s - c.observed.v);
    const double norm = res.norm();
    const double weight = norm <= delta ? 1.0 : delta / norm;

    Eigen::Matrix<double, 2, 3> dproj;
    dproj << cam.fx * iz / s, 0.0, -cam.fx * q.x() * iz * iz / s,
             0.0, cam.fy * iz / s, -cam.fy * q.y() * iz * iz / s;
    Eigen::Matrix<double, 3, 6> dq;
    dq << 0.0, q.z(), -q.y(), 1, 0, 0,
          -q.z(), 0.0, q.x(), 0, 1, 0,
          q.y(), -q.x(), 0.0, 0, 0, 1;
    const Eigen::Matrix<double, 2, 6> jac = dproj * dq;
    lin.hessian.noalias() += weight * jac.transpose() * jac;
    lin.gradient.noalias() += weight * jac.transpose() * res;
  }
  return lin;
}

}  // namespace

double reprojection_cost(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& pose,
                         double huber_delta) {
  double cost = 0.0;
  const Mat3& rot = pose.rotation();
  const Point3& t = pose.translation();
  for (const auto& c : corr) {
    const Point3 q = rot * c.world + t;
    if (!(q.z() > 0.0)) {
      cost += huber(kBehindPenaltyPx, huber_delta);
      continue;
    }
    const double s = cam.image_scale * q.z();
    const double du = (cam.fx * q.x() + cam.cx * q.z()) / s - c.observed.u;
    const double dv = (cam.fy * q.y() + cam.cy * q.z()) / s - c.observed.v;
    cost += huber(std::hypot(du, dv), huber_delta);
  }
  return cost;
}

Vector6d reprojection_gradient(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& pose,
                               double huber_delta) {
  return linearize(corr, cam, pose, huber_delta).gradient;
}

Pose apply_increment(const Pose& pose, const Vector6d& xi) {
  const Mat3 dr = exp_so3(xi.head<3>());
  return Pose(dr * pose.rotation(), dr * pose.translation() + xi.tail<3>());
}

PoseEstimate estimate_pose(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& initial,
                           const TrackingConfig& cfg) {
  if (corr.size() < 6) {
    throw Error(ErrorCode::kDegenerate, "need at least 6 correspondences, got " + std::to_string(corr.size()));
  }
  PoseEstimate est;
  est.pose = initial;
  est.cost = est.initial_cost = reprojection_cost(corr, cam, initial, cfg.huber_delta);
  est.cost_history.push_back(est.cost);

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Linearization lin = linearize(corr, cam, est.pose, cfg.huber_delta);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(lin.hessian);
    const double max_eig = eig.eigenvalues().maxCoeff();
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(max_eig > 0.0) || !(min_eig > 1e-12 * max_eig)) {
      throw Error(ErrorCode::kDegenerate, "normal equations are singular");
    }
    const Vector6d step = -lin.hessian.ldlt().solve(lin.gradient);

    bool accepted = false;
    double scale = 1.0;
    for (int halving = 0; halving < 8; ++halving, scale *= 0.5) {
      const Pose candidate = apply_increment(est.pose, scale * step);
      const double c = reprojection_cost(corr, cam, candidate, cfg.huber_delta);
      if (c <= est.cost) {
        const double decrease = est.cost - c;
        est.pose = candidate;
        est.cost = c;
        est.cost_history.push_back(c);
        est.iterations = it + 1;
        accepted = decrease >= cfg.convergence_tol;
        break;
      }
    }
    if (!accepted) break;
  }
  return est;
}

namespace {

std::vector<double> residual_norms(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& pose) {
  std::vector<double> out;
  out.reserve(corr.size());
  const Mat3& r = pose.rotation();
  const Point3& t = pose.translation();
  for (const auto& c : corr) {
    const Point3 q = r * c.world + t;
    if (!(q.z() > 0.0)) {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    const double s = cam.image_scale * q.z();
    out.push_back(std::hypot((cam.fx * q.x() + cam.cx * q.z()) / s - c.observed.u,
                             (cam.fy * q.y() + cam.cy * q.z()) / s - c.observed.v));
  }
  return out;
}

// Keeps correspondences within max(gate, 3 * median residual). Returns
// false (and leaves `kept` alone) when fewer than 6 would survive.
bool gate_correspondences(std::vector<Correspondence>& kept, const CameraModel& cam, const Pose& pose,
                          double gate) {
  const std::vector<double> res = residual_norms(kept, cam, pose);
  std::vector<double> sorted = res;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double limit = std::max(gate, 3.0 * sorted[sorted.size() / 2]);
  std::vector<Correspondence> inliers;
  inliers.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (res[i] <= limit) inliers.push_back(kept[i]);
  }
  if (inliers.size() < 6 || inliers.size() == kept.size()) return false;
  kept = std::move(inliers);
  return true;
}

}  // namespace

PoseEstimate estimate_pose_gated(std::span<const Correspondence> corr, const CameraModel& cam, const Pose& initial,
                                 const TrackingConfig& cfg, int rounds) {
  if (corr.size() < 6) return estimate_pose(corr, cam, initial, cfg);
  std::vector<Correspondence> kept(corr.begin(), corr.end());
  gate_correspondences(kept, cam, initial, cfg.outlier_gate_px);
  PoseEstimate est = estimate_pose(kept, cam, initial, cfg);
  for (int round = 0; round < rounds; ++round) {
    if (!gate_correspondences(kept, cam, est.pose, cfg.outlier_gate_px)) break;
    est = estimate_pose(kept, cam, est.pose, cfg);
  }
  return est;
}

ClassifiedPoints classify_points(const FrameObservation& obs, const FrameSegmentation& seg) {
  if (obs.depth.width != 0 && (obs.depth.width != seg.width || obs.depth.height != seg.height)) {
    throw Error(ErrorCode::kDimensionMismatch, "observation and segmentation sizes differ");
  }
  ClassifiedPoints out;
  for (const auto& r : seg.regions) {
    out.per_instance[r.instance_id];
    out.instance_class[r.instance_id] = r.class_id;
  }
  for (std::size_t i = 0; i < obs.features.size(); ++i) {
    const Feature& f = obs.features[i];
    if (!f.has_depth()) continue;
    const int x = std::clamp(static_cast<int>(std::lround(f.pixel.u)), 0, seg.width - 1);
    const int y = std::clamp(static_cast<int>(std::lround(f.pixel.v)), 0, seg.height - 1);
    int label = -1;
    for (const auto& r : seg.regions) {
      if (r.mask.test(x, y)) label = r.instance_id;
    }
    if (label < 0) {
      out.background.push_back(i);
    } else {
      out.per_instance[label].push_back(i);
    }
  }
  return out;
}

namespace {

// Map points projected into the image and bucketed on a square grid with
// cells half the query radius wide, stored contiguously per cell.
class ProjectedMap {
 public:
  ProjectedMap(const MapPointStore& map, const CameraModel& cam, const Pose& pose, double radius)
      : radius_(radius),
        side_(radius / 2.0),
        cols_(static_cast<long>(std::ceil((cam.width + 2 * radius) / side_)) + 1),
        rows_(static_cast<long>(std::ceil((cam.height + 2 * radius) / side_)) + 1),
        starts_(static_cast<std::size_t>(cols_ * rows_) + 1, 0) {
    const Mat3& rot = pose.rotation();
    const Point3& t = pose.translation();
    std::vector<std::pair<std::size_t, Entry>> visible;
    visible.reserve(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      const Point3 q = rot * map[i].position + t;
      if (!(q.z() > 0.0)) continue;
      const double s = cam.image_scale * q.z();
      const Pixel px{(cam.fx * q.x() + cam.cx * q.z()) / s, (cam.fy * q.y() + cam.cy * q.z()) / s};
      if (px.u < -radius || px.v < -radius || px.u >= cam.width + radius || px.v >= cam.height + radius) continue;
      const auto [cx, cy] = cell(px);
      const auto c = static_cast<std::size_t>(cy * cols_ + cx);
      ++starts_[c + 1];
      visible.push_back({c, {px.u, px.v, i}});
    }
    for (std::size_t c = 1; c < starts_.size(); ++c) starts_[c] += starts_[c - 1];
    entries_.resize(visible.size());
    std::vector<std::size_t> fill(starts_.begin(), starts_.end() - 1);
    for (const auto& [c, e] : visible) entries_[fill[c]++] = e;
  }

  template <typename Visit>
  void for_each_near(const Pixel& px, Visit visit) const {
    const auto [cx, cy] = cell(px);
    const double r2 = radius_ * radius_;
    for (long y = std::max(0L, cy - 2); y <= std::min(rows_ - 1, cy + 2); ++y) {
      const auto row = static_cast<std::size_t>(y * cols_);
      const auto x0 = static_cast<std::size_t>(std::max(0L, cx - 2));
      const auto x1 = static_cast<std::size_t>(std::min(cols_ - 1, cx + 2));
      for (std::size_t k = starts_[row + x0]; k < starts_[row + x1 + 1]; ++k) {
        const Entry& e = entries_[k];
        const double du = e.u - px.u;
        const double dv = e.v - px.v;
        const double d2 = du * du + dv * dv;
        if (d2 <= r2) visit(e.index, std::sqrt(d2));
      }
    }
  }

 private:
  struct Entry {
    double u;
    double v;
    std::size_t index;
  };

  // Cell coordinates relative to the grid origin at (-radius, -radius).
  std::pair<long, long> cell(const Pixel& px) const {
    return {static_cast<long>(std::floor((px.u + radius_) / side_)),
            static_cast<long>(std::floor((px.v + radius_) / side_))};
  }

  double radius_;
  double side_;
  long cols_;
  long rows_;
  std::vector<std::size_t> starts_;
  std::vector<Entry> entries_;
};

struct Candidate {
  std::size_t index = 0;
  int descriptor_distance = std::numeric_limits<int>::max();
  double pixel_distance = std::numeric_limits<double>::infinity();

  bool better_than(const Candidate& o) const {
    if (descriptor_distance != o.descriptor_distance) return descriptor_distance < o.descriptor_distance;
    if (pixel_distance != o.pixel_distance) return pixel_distance < o.pixel_distance;
    return index < o.index;
  }
};

std::optional<Candidate> best_candidate(const ProjectedMap& projected, const MapPointStore& map,
                                        const Feature& f, const TrackingConfig& cfg) {
  std::optional<Candidate> best;
  projected.for_each_near(f.pixel, [&](std::size_t i, double d) {
    const int hd = hamming_distance(f.descriptor, map[i].descriptor);
    if (hd > cfg.max_descriptor_distance) return;
    const Candidate c{i, hd, d};
    if (!best || c.better_than(*best)) best = c;
  });
  return best;
}

}  // namespace

std::vector<FeatureMatch> associate(const FrameObservation& obs, std::span<const std::size_t> features,
                                    const MapPointStore& map, const CameraModel& cam, const Pose& pose,
                                    double radius, const TrackingConfig& cfg) {
  std::vector<FeatureMatch> out;
  if (map.empty()) return out;
  const ProjectedMap projected(map, cam, pose, radius);
  for (const std::size_t fi : features) {
    if (const auto c = best_candidate(projected, map, obs.features[fi], cfg)) {
      out.push_back({fi, c->index});
    }
  }
  return out;
}

ClassifiedPoints judge_motion(const ClassifiedPoints& points, const FrameObservation& obs, const Pose& coarse,
                              const TrackingMap& map, const CameraModel& cam, const TrackingConfig& cfg) {
  ClassifiedPoints out = points;
  const ProjectedMap projected(map.store, cam, coarse, cfg.pixel_match_radius);
  const Pose cam_to_world = invert(coarse);
  for (const auto& [id, indices] : points.per_instance) {
    std::size_t counted = 0;
    std::size_t moving = 0;
    for (const std::size_t fi : indices) {
      const Feature& f = obs.features[fi];
      if (!f.has_depth()) continue;
      const auto c = best_candidate(projected, map.store, f, cfg);
      if (!c) continue;
      const Point3 world = cam_to_world.apply(back_project(cam, f.pixel, f.raw_depth));
      ++counted;
      if ((world - map.store[c->index].position).norm() >= cfg.match_dist_3d) ++moving;
    }
    const bool unsupported = counted == 0 || static_cast<double>(counted) <
                                                 cfg.min_support_fraction * static_cast<double>(indices.size());
    const bool is_moving =
        unsupported || static_cast<double>(moving) / static_cast<double>(counted) >= cfg.moving_fraction;
    out.motion_state[id] = is_moving ? MotionState::kMoving : MotionState::kStatic;
  }
  return out;
}

std::vector<FeatureMatch> fine_track_matches(const FrameObservation& obs, const ClassifiedPoints& points,
                                             const TrackingMap& map, const CameraModel& cam, const Pose& coarse,
                                             const TrackingConfig& cfg) {
  const std::vector<std::size_t> usable = points.static_features();
  return associate(obs, usable, map.store, cam, coarse, cfg.pixel_match_radius, cfg);
}

Pose fine_track(const FrameObservation& obs, const ClassifiedPoints& points, const TrackingMap& map,
                const CameraModel& cam, const Pose& coarse, const TrackingConfig& cfg) {
  const auto matches = fine_track_matches(obs, points, map, cam, coarse, cfg);
  const auto corr = to_correspondences(obs, matches, map.store);
  return estimate_pose_gated(corr, cam, coarse, cfg).pose;
}

std::vector<Correspondence> to_correspondences(const FrameObservation& obs, std::span<const FeatureMatch> matches,
                                               const MapPointStore& map) {
  std::vector<Correspondence> out;
  out.reserve(matches.size());
  for (const auto& m : matches) out.push_back({map[m.map_point].position, obs.features[m.feature].pixel});
  return out;
}

}  // namespace segslam
