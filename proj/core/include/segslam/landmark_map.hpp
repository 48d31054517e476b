#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segslam/geometry.hpp"
#include "segslam/observation.hpp"

namespace segslam {

enum class Provenance : std::uint8_t {
  kBackground = 0,
  kStaticInstance = 1,
};

struct MapPoint {
  Point3 position = Point3::Zero();  // world frame
  Descriptor descriptor;
  Provenance provenance = Provenance::kBackground;
  int instance_class = -1;  // class id for kStaticInstance points
  std::uint32_t observation_count = 1;
};

inline constexpr double kDefaultMergeRadius = 0.01;

/// Point storage with a uniform hash grid for radius queries. Points closer
/// than merge_radius to an existing point are merged into it, so stored
/// points are pairwise at least merge_radius apart. Points are never removed
/// and indices are stable.
class MapPointStore {
 public:
  explicit MapPointStore(double merge_radius = kDefaultMergeRadius);

  double merge_radius() const { return merge_radius_; }
  std::span<const MapPoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const MapPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Closest stored point strictly within `radius` of p.
  std::optional<std::size_t> nearest_within(const Point3& p, double radius) const;

  /// Increments the observation count of the nearest point within
  /// merge_radius, or appends `point`. Returns (index, inserted).
  std::pair<std::size_t, bool> merge_or_insert(MapPoint point);

  /// Appends without the merge check. Used when loading a saved map.
  void append_unchecked(MapPoint point);

 private:
  struct CellHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const noexcept;
  };
  std::array<std::int64_t, 3> cell_of(const Point3& p) const;

  double merge_radius_;
  std::vector<MapPoint> points_;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, CellHash> grid_;
};

struct KeyframeRecord {
  int frame_index = 0;
  Pose pose;
};

/// Per-session map used for tracking: background points and points of
/// instances judged static.
struct TrackingMap {
  MapPointStore store;
  std::vector<KeyframeRecord> keyframes;

  explicit TrackingMap(double merge_radius = kDefaultMergeRadius) : store(merge_radius) {}
  std::size_t size() const { return store.size(); }
};

/// Persistent map holding only background points. insert() refuses points
/// of any other provenance.
class LongTermMap {
 public:
  explicit LongTermMap(double merge_radius = kDefaultMergeRadius) : store_(merge_radius) {}

  const MapPointStore& store() const { return store_; }
  std::span<const MapPoint> points() const { return store_.points(); }
  std::size_t size() const { return store_.size(); }

  /// Returns true if the point was new. Throws kInvalidArgument for a
  /// non-background point.
  bool insert(const MapPoint& point);

  /// Count of points whose provenance is not kBackground. Always zero
  /// unless memory was corrupted; exposed for audits.
  std::size_t impurity_count() const;

 private:
  MapPointStore store_;
};

}  // namespace segslam
