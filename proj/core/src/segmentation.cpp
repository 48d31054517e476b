#include "segslam/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include "segslam/error.hpp"
#include "segslam/random.hpp"

namespace segslam {

void FrameSegmentation::validate() const {
  std::set<int> ids;
  std::vector<std::uint8_t> owned(static_cast<std::size_t>(width) * height, 0);
  for (const auto& r : regions) {
    if (r.mask.width() != width || r.mask.height() != height) {
      throw Error(ErrorCode::kDimensionMismatch, "region mask does not match frame size");
    }
    if (!ids.insert(r.instance_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate instance id " + std::to_string(r.instance_id));
    }
    const auto& bits = r.mask.data();
    bool any = false;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (!bits[i]) continue;
      any = true;
      if (owned[i]) throw Error(ErrorCode::kInvalidArgument, "region masks overlap");
      owned[i] = 1;
    }
    if (!any) throw Error(ErrorCode::kEmptyRegion, "region " + std::to_string(r.instance_id) + " is empty");
  }
}

const SegmentedRegion* FrameSegmentation::find(int instance_id) const {
  for (const auto& r : regions) {
    if (r.instance_id == instance_id) return &r;
  }
  return nullptr;
}

std::vector<int> FrameSegmentation::label_grid() const {
  std::vector<int> labels(static_cast<std::size_t>(width) * height, -1);
  for (const auto& r : regions) {
    const auto& bits = r.mask.data();
    for (std::size_t i = 0; i < bits.size() && i < labels.size(); ++i) {
      if (bits[i]) labels[i] = r.instance_id;
    }
  }
  return labels;
}

FrameSegmentation FrameSegmentation::from_label_grid(int frame, int w, int h,
                                                     std::span<const int> labels,
                                                     const std::map<int, int>& class_of) {
  if (labels.size() != static_cast<std::size_t>(w) * h) {
    throw Error(ErrorCode::kDimensionMismatch, "label grid size does not match frame size");
  }
  std::map<int, BinaryMask> masks;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = labels[static_cast<std::size_t>(y) * w + x];
      if (id < 0) continue;
      auto it = masks.try_emplace(id, w, h).first;
      it->second.set(x, y);
    }
  }
  FrameSegmentation seg(frame, w, h);
  for (auto& [id, mask] : masks) {
    SegmentedRegion r;
    r.instance_id = id;
    const auto c = class_of.find(id);
    r.class_id = c == class_of.end() ? 0 : c->second;
    r.mask = std::move(mask);
    seg.regions.push_back(std::move(r));
  }
  return seg;
}

void ClassTable::add(int class_id, std::string name, bool moveable) {
  if (!entries_.emplace(class_id, ClassInfo{std::move(name), moveable}).second) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate class id " + std::to_string(class_id));
  }
}

const ClassInfo* ClassTable::find(int class_id) const {
  const auto it = entries_.find(class_id);
  return it == entries_.end() ? nullptr : &it->second;
}

void SimilarityWeights::validate() const {
  if (!(w1 >= 0) || !(w2 >= 0) || !(w1 + w2 > 0) || !(match_threshold > 0) || !(replace_margin >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "similarity weights must be non-negative with a positive sum and threshold");
  }
}

double region_similarity(const SegmentedRegion& a, const SegmentedRegion& b,
                         const SimilarityWeights& w, double diag) {
  const std::size_t area_a = a.mask.count();
  const std::size_t area_b = b.mask.count();
  if (area_a == 0 || area_b == 0) throw Error(ErrorCode::kEmptyRegion, "cannot compare an empty region");
  const double dist = (a.mask.barycenter() - b.mask.barycenter()).norm();
  const double shape = std::sqrt(static_cast<double>(a.mask.symmetric_difference_count(b.mask)) /
                                 static_cast<double>(area_a + area_b));
  return w.w1 * (dist / diag) + w.w2 * shape;
}

namespace {

template <typename Pred>
std::optional<RegionMatch> best_match(const SegmentedRegion& target,
                                      std::span<const SegmentedRegion> candidates,
                                      const SimilarityWeights& w, Pred eligible) {
  const double diag = std::hypot(static_cast<double>(target.mask.width()),
                                 static_cast<double>(target.mask.height()));
  std::optional<RegionMatch> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!eligible(i)) continue;
    const double s = region_similarity(target, candidates[i], w, diag);
    if (!best || s < best->score ||
        (s == best->score && candidates[i].instance_id < candidates[best->index].instance_id)) {
      best = RegionMatch{i, s};
    }
  }
  if (best && best->score < w.match_threshold) return best;
  return std::nullopt;
}

}  // namespace

std::optional<RegionMatch> find_match(const SegmentedRegion& target,
                                      std::span<const SegmentedRegion> candidates,
                                      const SimilarityWeights& w) {
  return best_match(target, candidates, w, [](std::size_t) { return true; });
}

SegmentedRegion project_region(const SegmentedRegion& region, const DepthGrid& depth,
                               const CameraModel& cam, const Pose& rel) {
  const int w = region.mask.width();
  const int h = region.mask.height();
  if (depth.width != w || depth.height != h) {
    throw Error(ErrorCode::kDimensionMismatch, "depth grid does not match mask size");
  }
  SegmentedRegion out;
  out.instance_id = region.instance_id;
  out.class_id = region.class_id;
  out.moveable = region.moveable;
  out.confidence = region.confidence;
  out.mask = BinaryMask(w, h);

  // q = z * (r * ray(x, y)) + t, and r * ray is affine in x along a row.
  const Mat3& r = rel.rotation();
  const Point3& t = rel.translation();
  const Point3 step_x = r.col(0) / cam.fx;
  bool any = false;
  const auto& bits = region.mask.data();
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = bits.data() + static_cast<std::size_t>(y) * w;
    const std::uint8_t* first = std::find(row, row + w, std::uint8_t{1});
    if (first == row + w) continue;
    const Point3 row_origin = r * Point3(-cam.cx / cam.fx, (y - cam.cy) / cam.fy, 1.0);
    for (int x = static_cast<int>(first - row); x < w; ++x) {
      if (!row[x]) continue;
      const std::uint16_t raw = depth.at(x, y);
      if (raw == 0) continue;
      const double z = raw / cam.depth_factor;
      const Point3 q = z * (row_origin + x * step_x) + t;
      if (!(q.z() > 0.0)) continue;
      const double s = cam.image_scale * q.z();
      const double u = (cam.fx * q.x() + cam.cx * q.z()) / s;
      const double v = (cam.fy * q.y() + cam.cy * q.z()) / s;
      if (!(u > -0.5 && v > -0.5 && u < w - 0.5 && v < h - 0.5)) continue;
      out.mask.set(static_cast<int>(std::floor(u + 0.5)), static_cast<int>(std::floor(v + 0.5)));
      any = true;
    }
  }
  if (!any) {
    throw Error(ErrorCode::kEmptyProjection,
                "region " + std::to_string(region.instance_id) + " left the view");
  }
  out.mask = out.mask.closed(1);
  return out;
}

namespace {

// Hands every multiply-owned pixel to the region with the nearest
// barycenter, then drops regions left empty.
void resolve_overlaps(FrameSegmentation& seg) {
  const int w = seg.width;
  const int h = seg.height;
  std::vector<Eigen::Vector2d> centers;
  centers.reserve(seg.regions.size());
  for (const auto& r : seg.regions) centers.push_back(r.mask.barycenter());

  if (seg.regions.size() < 2) return;
  // Per-pixel owner counts, eight bytes at a time; counts stay far below 256.
  std::vector<std::uint64_t> owners((static_cast<std::size_t>(w) * h + 7) / 8, 0);
  for (const auto& r : seg.regions) {
    const auto& bits = r.mask.data();
    for (std::size_t i = 0; i < bits.size(); i += 8) {
      std::uint64_t word = 0;
      std::memcpy(&word, bits.data() + i, std::min<std::size_t>(8, bits.size() - i));
      owners[i / 8] += word;
    }
  }
  constexpr std::uint64_t kHighBits = 0xfefefefefefefefeull;  // any byte value >= 2
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if ((idx & 7) == 0 && x + 8 <= w && !(owners[idx / 8] & kHighBits)) {
        x += 7;
        continue;
      }
      if (((owners[idx / 8] >> (8 * (idx & 7))) & 0xff) < 2) continue;
      std::size_t winner = seg.regions.size();
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < seg.regions.size(); ++k) {
        if (!seg.regions[k].mask.test(x, y)) continue;
        const double d = (centers[k] - Eigen::Vector2d(x, y)).squaredNorm();
        if (d < best || (d == best && seg.regions[k].instance_id < seg.regions[winner].instance_id)) {
          best = d;
          winner = k;
        }
      }
      for (std::size_t k = 0; k < seg.regions.size(); ++k) {
        if (k != winner) seg.regions[k].mask.set(x, y, false);
      }
    }
  }
  std::erase_if(seg.regions, [](const SegmentedRegion& r) { return r.mask.empty(); });
}

}  // namespace

FrameSegmentation refine(const FrameSegmentation& prev, const DepthGrid& prev_depth,
                         const FrameSegmentation& cur_coarse, const Pose& rel,
                         const CameraModel& cam, const SimilarityWeights& w) {
  if (prev.width != cur_coarse.width || prev.height != cur_coarse.height ||
      prev_depth.width != prev.width || prev_depth.height != prev.height ||
      cam.width != prev.width || cam.height != prev.height) {
    throw Error(ErrorCode::kDimensionMismatch, "refine inputs disagree on frame size");
  }

  std::vector<const SegmentedRegion*> ordered;
  for (const auto& r : prev.regions) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->instance_id < b->instance_id; });

  FrameSegmentation out(cur_coarse.frame_index, cur_coarse.width, cur_coarse.height);
  out.regions = cur_coarse.regions;
  for (auto& r : out.regions) r.confidence = kCoarseConfidence;
  const std::size_t n_current = out.regions.size();
  std::vector<bool> consumed(n_current, false);

  int next_id = 0;
  for (const auto& r : prev.regions) next_id = std::max(next_id, r.instance_id + 1);
  for (const auto& r : cur_coarse.regions) next_id = std::max(next_id, r.instance_id + 1);

  for (const auto* source : ordered) {
    SegmentedRegion projected;
    try {
      projected = project_region(*source, prev_depth, cam, rel);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kEmptyProjection) continue;
      throw;
    }

    const std::span<const SegmentedRegion> current(out.regions.data(), n_current);
    const auto match = best_match(projected, current, w, [&](std::size_t i) { return !consumed[i]; });
    if (match) {
      consumed[match->index] = true;
      SegmentedRegion& target = out.regions[match->index];
      const double inter = static_cast<double>(target.mask.intersection_count(projected.mask));
      const double ratio_cur = inter / static_cast<double>(target.mask.count());
      const double ratio_proj = inter / static_cast<double>(projected.mask.count());
      if (ratio_proj - ratio_cur > w.replace_margin) {
        target.mask = std::move(projected.mask);
        target.confidence = kRefinedConfidence;
      }
    } else if (prev.regions.size() > out.regions.size()) {
      projected.instance_id = next_id++;
      projected.confidence = kRefinedConfidence;
      out.regions.push_back(std::move(projected));
    }
  }

  resolve_overlaps(out);
  return out;
}

FrameSegmentation shortlist_moveable(const FrameSegmentation& seg, const ClassTable& table) {
  FrameSegmentation out = seg;
  for (auto& r : out.regions) {
    const ClassInfo* info = table.find(r.class_id);
    if (!info) throw Error(ErrorCode::kUnknownClass, "class id " + std::to_string(r.class_id));
    r.moveable = info->moveable;
  }
  return out;
}

FrameSegmentation corrupt(const FrameSegmentation& seg, double drop_rate, double dilate_rate,
                          std::uint64_t seed) {
  if (!(drop_rate >= 0 && drop_rate <= 1) || !(dilate_rate >= 0 && dilate_rate <= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "corruption rates must lie in [0, 1]");
  }
  Rng rng(seed);
  FrameSegmentation out(seg.frame_index, seg.width, seg.height);
  std::vector<bool> grow;
  for (const auto& r : seg.regions) {
    const bool drop = rng.bernoulli(drop_rate);
    const bool dilate = rng.bernoulli(dilate_rate);
    if (drop) continue;
    out.regions.push_back(r);
    grow.push_back(dilate);
  }

  BinaryMask owned(seg.width, seg.height);
  for (const auto& r : out.regions) owned |= r.mask;
  for (std::size_t k = 0; k < out.regions.size(); ++k) {
    if (!grow[k]) continue;
    BinaryMask extra = out.regions[k].mask.dilated(2);
    extra.subtract(owned);
    owned |= extra;
    out.regions[k].mask |= extra;
  }
  return out;
}

}  // namespace segslam
