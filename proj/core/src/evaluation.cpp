#include "segslam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "segslam/error.hpp"

namespace segslam {

void Trajectory::validate() const {
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].timestamp > poses[i - 1].timestamp)) {
      throw Error(ErrorCode::kInvalidArgument, "trajectory timestamps must strictly increase");
    }
  }
}

Trajectory read_tum_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Trajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw Error(ErrorCode::kParse, "bad trajectory line in " + path.string() + ": " + line);
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (!(q.norm() > 0)) throw Error(ErrorCode::kParse, "zero quaternion in " + path.string());
    q.normalize();
    const Pose cam_to_world(q.toRotationMatrix(), Point3(tx, ty, tz));
    traj.poses.push_back({t, invert(cam_to_world)});
  }
  traj.validate();
  return traj;
}

void write_tum_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n" << std::setprecision(17);
  for (const auto& sp : traj.poses) {
    const Pose c2w = invert(sp.pose);
    Eigen::Quaterniond q(c2w.rotation());
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;
    const Point3& t = c2w.translation();
    out << sp.timestamp << " " << t.x() << " " << t.y() << " " << t.z() << " " << q.x() << " " << q.y() << " "
        << q.z() << " " << q.w() << "\n";
  }
}

std::vector<PositionPair> associate_positions(const Trajectory& est, const Trajectory& gt, double max_dt) {
  std::vector<PositionPair> pairs;
  std::vector<bool> used(gt.poses.size(), false);
  for (const auto& e : est.poses) {
    const auto it = std::lower_bound(gt.poses.begin(), gt.poses.end(), e.timestamp,
                                     [](const StampedPose& p, double t) { return p.timestamp < t; });
    std::size_t best = gt.poses.size();
    double best_dt = max_dt;
    for (auto cand : {it, it == gt.poses.begin() ? it : std::prev(it)}) {
      if (cand == gt.poses.end()) continue;
      const auto idx = static_cast<std::size_t>(cand - gt.poses.begin());
      const double dt = std::abs(cand->timestamp - e.timestamp);
      if (!used[idx] && dt <= best_dt) {
        best_dt = dt;
        best = idx;
      }
    }
    if (best == gt.poses.size()) continue;
    used[best] = true;
    pairs.push_back({e.pose.center(), gt.poses[best].pose.center()});
  }
  return pairs;
}

namespace {

Pose umeyama(const std::vector<PositionPair>& pairs) {
  if (pairs.size() < 3) {
    throw Error(ErrorCode::kInsufficientOverlap,
                "need 3 associated poses, have " + std::to_string(pairs.size()));
  }
  Point3 mu_e = Point3::Zero(), mu_g = Point3::Zero();
  for (const auto& p : pairs) {
    mu_e += p.estimated;
    mu_g += p.reference;
  }
  const double n = static_cast<double>(pairs.size());
  mu_e /= n;
  mu_g /= n;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pairs) cov += (p.reference - mu_g) * (p.estimated - mu_e).transpose();
  cov /= n;
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) s(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * s * svd.matrixV().transpose();
  return Pose(r, mu_g - r * mu_e);
}

std::vector<double> aligned_errors(const std::vector<PositionPair>& pairs, const Pose& s) {
  std::vector<double> errs;
  errs.reserve(pairs.size());
  for (const auto& p : pairs) errs.push_back((s.apply(p.estimated) - p.reference).norm());
  return errs;
}

double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (const double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

Pose align_umeyama(const Trajectory& est, const Trajectory& gt) { return umeyama(associate_positions(est, gt)); }

double unaligned_rmse(const Trajectory& est, const Trajectory& gt) {
  const auto pairs = associate_positions(est, gt);
  return rms(aligned_errors(pairs, Pose::identity()));
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AteReport ate(const Trajectory& est, const Trajectory& gt) {
  const auto pairs = associate_positions(est, gt);
  const Pose s = umeyama(pairs);
  AteReport rep;
  rep.per_frame_errors = aligned_errors(pairs, s);
  rep.rmse = rep.median = rep.min = rep.max = rms(rep.per_frame_errors);
  rep.run_rmse = {rep.rmse};
  return rep;
}

AteReport ate(std::span<const Trajectory> runs, const Trajectory& gt) {
  if (runs.empty()) throw Error(ErrorCode::kInvalidArgument, "no runs to aggregate");
  AteReport rep;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    AteReport one = ate(runs[i], gt);
    if (i == 0) rep.per_frame_errors = std::move(one.per_frame_errors);
    rep.run_rmse.push_back(one.rmse);
  }
  rep.median = median_of(rep.run_rmse);
  rep.min = *std::min_element(rep.run_rmse.begin(), rep.run_rmse.end());
  rep.max = *std::max_element(rep.run_rmse.begin(), rep.run_rmse.end());
  rep.rmse = rep.median;
  return rep;
}

namespace {

void check_sequences(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::kDimensionMismatch, "frame counts differ");
  for (std::size_t f = 0; f < gt.size(); ++f) {
    if (pred[f].width != gt[f].width || pred[f].height != gt[f].height) {
      throw Error(ErrorCode::kDimensionMismatch, "frame " + std::to_string(f) + " sizes differ");
    }
  }
}

std::set<int> gt_classes(std::span<const FrameSegmentation> gt) {
  std::set<int> classes;
  for (const auto& f : gt) {
    for (const auto& r : f.regions) {
      if (!r.mask.empty()) classes.insert(r.class_id);
    }
  }
  return classes;
}

std::map<int, double> class_iou(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt) {
  check_sequences(pred, gt);
  std::map<int, double> out;
  for (const int cls : gt_classes(gt)) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t f = 0; f < gt.size(); ++f) {
      BinaryMask p(gt[f].width, gt[f].height), g(gt[f].width, gt[f].height);
      for (const auto& r : pred[f].regions) {
        if (r.class_id == cls) p |= r.mask;
      }
      for (const auto& r : gt[f].regions) {
        if (r.class_id == cls) g |= r.mask;
      }
      const std::size_t i = p.intersection_count(g);
      inter += i;
      uni += p.count() + g.count() - i;
    }
    out[cls] = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return out;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t i = a.intersection_count(b);
  const std::size_t u = a.count() + b.count() - i;
  return u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u);
}

std::map<int, std::pair<double, std::size_t>> class_ap50(std::span<const FrameSegmentation> pred,
                                                         std::span<const FrameSegmentation> gt) {
  check_sequences(pred, gt);
  std::map<int, std::pair<double, std::size_t>> out;
  for (const int cls : gt_classes(gt)) {
    struct Det {
      std::size_t frame;
      const SegmentedRegion* region;
      double best_iou;
    };
    std::vector<Det> dets;
    std::vector<std::vector<const SegmentedRegion*>> truths(gt.size());
    std::size_t n_gt = 0;
    for (std::size_t f = 0; f < gt.size(); ++f) {
      for (const auto& r : gt[f].regions) {
        if (r.class_id == cls && !r.mask.empty()) {
          truths[f].push_back(&r);
          ++n_gt;
        }
      }
      for (const auto& r : pred[f].regions) {
        if (r.class_id != cls || r.mask.empty()) continue;
        double best = 0.0;
        for (const auto* t : truths[f]) best = std::max(best, mask_iou(r.mask, t->mask));
        dets.push_back({f, &r, best});
      }
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
      if (a.region->confidence != b.region->confidence) return a.region->confidence > b.region->confidence;
      return a.best_iou > b.best_iou;
    });

    std::vector<std::vector<bool>> taken(gt.size());
    for (std::size_t f = 0; f < gt.size(); ++f) taken[f].assign(truths[f].size(), false);
    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const auto& d : dets) {
      double best = 0.5;
      std::optional<std::size_t> hit;
      for (std::size_t k = 0; k < truths[d.frame].size(); ++k) {
        if (taken[d.frame][k]) continue;
        const double iou = mask_iou(d.region->mask, truths[d.frame][k]->mask);
        if (iou >= best) {
          best = iou;
          hit = k;
        }
      }
      if (hit) {
        taken[d.frame][*hit] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    // Area under the precision envelope.
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    out[cls] = {ap, n_gt};
  }
  return out;
}

double mean_of(const std::map<int, double>& m) {
  if (m.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& [k, v] : m) acc += v;
  return acc / static_cast<double>(m.size());
}

}  // namespace

double miou(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt) {
  return mean_of(class_iou(pred, gt));
}

double map50(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt) {
  std::map<int, double> ap;
  for (const auto& [cls, v] : class_ap50(pred, gt)) ap[cls] = v.first;
  return mean_of(ap);
}

SegReport evaluate_segmentation(std::span<const FrameSegmentation> pred, std::span<const FrameSegmentation> gt) {
  SegReport rep;
  const auto ious = class_iou(pred, gt);
  const auto aps = class_ap50(pred, gt);
  for (const auto& [cls, iou] : ious) {
    ClassScore& s = rep.per_class[cls];
    s.iou = iou;
    s.ap50 = aps.at(cls).first;
    s.gt_instances = aps.at(cls).second;
  }
  rep.miou = mean_of(ious);
  std::map<int, double> ap;
  for (const auto& [cls, v] : aps) ap[cls] = v.first;
  rep.map50 = mean_of(ap);
  return rep;
}

}  // namespace segslam
