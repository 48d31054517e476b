#pragma once

#include <filesystem>
#include <optional>

#include "segslam/landmark_map.hpp"
#include "segslam/tracking.hpp"

namespace segslam {

/// Inserts a keyframe: background and static-instance features are lifted
/// to the world with the fine pose and merged into the map (existing points
/// within merge radius only gain an observation). Features of moving
/// instances are never inserted.
void update_tracking_map(TrackingMap& map, const FrameObservation& obs, const ClassifiedPoints& points,
                         const Pose& fine, const CameraModel& cam);

/// Copies the background points of the tracking map into the long-term
/// map, skipping points already present. Only tracking-map indices from
/// `first` on are visited, so a caller can sync just the points appended
/// since its last call. Returns the number added.
std::size_t update_long_term_map(LongTermMap& ltm, const TrackingMap& tm, std::size_t first = 0);

/// Number of yaw seeds tried by relocalize.
inline constexpr int kRelocalizationSeeds = 8;

/// Descriptor-only matching of the frame against `map` followed by pose
/// estimation from eight yaw-rotated seeds around the identity (plus
/// `hint` when given); the lowest final cost wins. Throws kDegenerate when
/// fewer than 6 features match or every seed fails.
PoseEstimate relocalize(const MapPointStore& map, const FrameObservation& obs, const CameraModel& cam,
                        const TrackingConfig& cfg, const std::optional<Pose>& hint = std::nullopt);

/// Descriptor matches used by relocalize (minimum Hamming distance within
/// cfg.max_descriptor_distance; ties go to the oldest map point).
std::vector<FeatureMatch> match_descriptors(const FrameObservation& obs, const MapPointStore& map,
                                            const TrackingConfig& cfg);

// Map file, all integers and floats little-endian:
//   bytes 0-3   magic "SGMP"
//   u32         format version (1)
//   u64         point count
//   per point:  f64 x, f64 y, f64 z, u8 provenance (0 background,
//               1 static instance), u32 descriptor length, descriptor
//               bytes, u32 observation count
inline constexpr std::uint32_t kMapFormatVersion = 1;

void save_map(const std::filesystem::path& path, const MapPointStore& store);
/// Loaded points keep file order; no merging is applied.
MapPointStore load_map(const std::filesystem::path& path, double merge_radius = kDefaultMergeRadius);

void save_map(const std::filesystem::path& path, const LongTermMap& ltm);
LongTermMap load_long_term_map(const std::filesystem::path& path, double merge_radius = kDefaultMergeRadius);

}  // namespace segslam
