#include "segslam/landmark_map.hpp"

#include <cmath>
#include <limits>

#include "segslam/error.hpp"

namespace segslam {

MapPointStore::MapPointStore(double merge_radius) : merge_radius_(merge_radius) {
  if (!(merge_radius > 0)) throw Error(ErrorCode::kInvalidArgument, "merge radius must be positive");
}

std::size_t MapPointStore::CellHash::operator()(const std::array<std::int64_t, 3>& k) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

std::array<std::int64_t, 3> MapPointStore::cell_of(const Point3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / merge_radius_)),
          static_cast<std::int64_t>(std::floor(p.y() / merge_radius_)),
          static_cast<std::int64_t>(std::floor(p.z() / merge_radius_))};
}

std::optional<std::size_t> MapPointStore::nearest_within(const Point3& p, double radius) const {
  const auto c = cell_of(p);
  const auto reach = static_cast<std::int64_t>(std::ceil(radius / merge_radius_));
  std::optional<std::size_t> best;
  double best_d2 = radius * radius;
  for (std::int64_t dx = -reach; dx <= reach; ++dx) {
    for (std::int64_t dy = -reach; dy <= reach; ++dy) {
      for (std::int64_t dz = -reach; dz <= reach; ++dz) {
        const auto it = grid_.find({c[0] + dx, c[1] + dy, c[2] + dz});
        if (it == grid_.end()) continue;
        for (const std::size_t i : it->second) {
          const double d2 = (points_[i].position - p).squaredNorm();
          if (d2 < best_d2 || (best && d2 == best_d2 && i < *best)) {
            best_d2 = d2;
            best = i;
          }
        }
      }
    }
  }
  return best;
}

std::pair<std::size_t, bool> MapPointStore::merge_or_insert(MapPoint point) {
  if (!point.position.allFinite()) throw Error(ErrorCode::kInvalidArgument, "map point is not finite");
  if (const auto hit = nearest_within(point.position, merge_radius_)) {
    ++points_[*hit].observation_count;
    return {*hit, false};
  }
  append_unchecked(std::move(point));
  return {points_.size() - 1, true};
}

void MapPointStore::append_unchecked(MapPoint point) {
  if (point.observation_count == 0) point.observation_count = 1;
  grid_[cell_of(point.position)].push_back(points_.size());
  points_.push_back(std::move(point));
}

bool LongTermMap::insert(const MapPoint& point) {
  if (point.provenance != Provenance::kBackground) {
    throw Error(ErrorCode::kInvalidArgument, "long-term map only accepts background points");
  }
  return store_.merge_or_insert(point).second;
}

std::size_t LongTermMap::impurity_count() const {
  std::size_t n = 0;
  for (const auto& p : store_.points()) n += p.provenance != Provenance::kBackground;
  return n;
}

}  // namespace segslam
