#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segslam/geometry.hpp"
#include "segslam/mask.hpp"

namespace segslam {

/// Confidence attached to regions that came out of pose-guided refinement
/// (replaced or added) versus regions kept from the coarse segmentation.
inline constexpr double kRefinedConfidence = 1.0;
inline constexpr double kCoarseConfidence = 0.9;

struct SegmentedRegion {
  int instance_id = 0;
  int class_id = 0;
  BinaryMask mask;
  bool moveable = false;
  double confidence = 1.0;
};

/// One frame's instance masks. Regions never overlap; unowned pixels are
/// background.
struct FrameSegmentation {
  int frame_index = 0;
  int width = 0;
  int height = 0;
  std::vector<SegmentedRegion> regions;

  FrameSegmentation() = default;
  FrameSegmentation(int frame, int w, int h) : frame_index(frame), width(w), height(h) {}

  /// Throws kDimensionMismatch / kInvalidArgument on a broken invariant
  /// (mask size, empty mask, duplicate id, overlapping masks).
  void validate() const;

  const SegmentedRegion* find(int instance_id) const;

  /// Per-pixel owner: -1 for background, otherwise the instance id.
  std::vector<int> label_grid() const;
  /// Builds regions from a label grid (-1 = background). Class ids come
  /// from `class_of`; unknown instances get class 0.
  static FrameSegmentation from_label_grid(int frame, int w, int h, std::span<const int> labels,
                                           const std::map<int, int>& class_of);
};

struct ClassInfo {
  std::string name;
  bool moveable = false;
};

class ClassTable {
 public:
  /// Throws kInvalidArgument on a duplicate id.
  void add(int class_id, std::string name, bool moveable);
  const ClassInfo* find(int class_id) const;
  const std::map<int, ClassInfo>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<int, ClassInfo> entries_;
};

/// Weights of the two similarity terms. w1 multiplies the barycenter
/// distance expressed in image-diagonal units, so both terms and the
/// threshold are resolution independent.
struct SimilarityWeights {
  double w1 = 0.5;
  double w2 = 0.5;
  double match_threshold = 0.4;
  /// refine swaps in the projected mask only when its overlap ratio exceeds
  /// the current one by more than this
  double replace_margin = 0.05;

  void validate() const;
};

/// w1 * |c_a - c_b| / diag + w2 * sqrt(|a xor b| / (|a| + |b|)).
/// Throws kEmptyRegion if either mask is empty.
double region_similarity(const SegmentedRegion& a, const SegmentedRegion& b,
                         const SimilarityWeights& w, double diag);

struct RegionMatch {
  std::size_t index = 0;  // position in the candidate list
  double score = 0.0;
};

/// Candidate with the lowest similarity score, if that score is strictly
/// below w.match_threshold. Ties go to the lowest instance_id. The image
/// diagonal is taken from the target mask size.
std::optional<RegionMatch> find_match(const SegmentedRegion& target,
                                      std::span<const SegmentedRegion> candidates,
                                      const SimilarityWeights& w);

/// Warps a region into another view: each mask pixel with depth is lifted,
/// moved by `rel`, reprojected, rounded and clipped, then the result is
/// closed with a 3x3 element to fill forward-warping holes.
/// Throws kEmptyProjection if nothing lands inside the image.
SegmentedRegion project_region(const SegmentedRegion& region, const DepthGrid& depth,
                               const CameraModel& cam, const Pose& rel);

/// Pose-guided refinement of the current coarse segmentation using the
/// previous frame's final segmentation.
///
/// Projected previous regions are visited in ascending instance id. A
/// projected region that matches a current region (one-to-one) replaces
/// the current mask when its intersection covers a larger fraction of
/// itself than of the current region; identity (instance and class id) is
/// kept from the current region. An unmatched projected region is added
/// under a fresh instance id while the running region count is still below
/// the previous frame's count. Remaining overlaps are resolved to the
/// region with the nearest barycenter.
FrameSegmentation refine(const FrameSegmentation& prev, const DepthGrid& prev_depth,
                         const FrameSegmentation& cur_coarse, const Pose& rel,
                         const CameraModel& cam, const SimilarityWeights& w);

/// Sets `moveable` from the class table. Throws kUnknownClass.
FrameSegmentation shortlist_moveable(const FrameSegmentation& seg, const ClassTable& table);

/// Seeded corruption emulating an imperfect segmenter: drops each region
/// with probability drop_rate and grows each survivor with a 5x5 dilation
/// with probability dilate_rate. Dilation only claims background pixels.
FrameSegmentation corrupt(const FrameSegmentation& seg, double drop_rate, double dilate_rate,
                          std::uint64_t seed);

}  // namespace segslam
