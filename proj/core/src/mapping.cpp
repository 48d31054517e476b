#include "segslam/mapping.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>

#include "segslam/error.hpp"

namespace segslam {

void update_tracking_map(TrackingMap& map, const FrameObservation& obs, const ClassifiedPoints& points,
                         const Pose& fine, const CameraModel& cam) {
  // Our poses map world -> camera, so the camera-to-world transform that
  // places a keyframe point in the map is the inverse of the fine pose.
  const Pose cam_to_world = invert(fine);
  auto insert = [&](std::size_t fi, Provenance prov, int cls) {
    const Feature& f = obs.features[fi];
    if (!f.has_depth()) return;
    MapPoint p;
    p.position = cam_to_world.apply(back_project(cam, f.pixel, f.raw_depth));
    p.descriptor = f.descriptor;
    p.provenance = prov;
    p.instance_class = cls;
    map.store.merge_or_insert(std::move(p));
  };
  for (const std::size_t fi : points.background) insert(fi, Provenance::kBackground, -1);
  for (const auto& [id, indices] : points.per_instance) {
    if (!points.is_static(id)) continue;
    const auto cls = points.instance_class.find(id);
    const int class_id = cls == points.instance_class.end() ? -1 : cls->second;
    for (const std::size_t fi : indices) insert(fi, Provenance::kStaticInstance, class_id);
  }
  map.keyframes.push_back({obs.frame_index, fine});
}

std::size_t update_long_term_map(LongTermMap& ltm, const TrackingMap& tm, std::size_t first) {
  std::size_t added = 0;
  const auto& points = tm.store.points();
  for (std::size_t i = first; i < points.size(); ++i) {
    const MapPoint& p = points[i];
    if (p.provenance != Provenance::kBackground) continue;
    MapPoint copy = p;
    copy.observation_count = 1;
    added += ltm.insert(copy) ? 1 : 0;
  }
  return added;
}

std::vector<FeatureMatch> match_descriptors(const FrameObservation& obs, const MapPointStore& map,
                                            const TrackingConfig& cfg) {
  std::unordered_map<std::string, std::size_t> exact;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const auto& d = map[i].descriptor;
    exact.try_emplace(std::string(d.begin(), d.end()), i);
  }
  std::vector<FeatureMatch> out;
  for (std::size_t fi = 0; fi < obs.features.size(); ++fi) {
    const Descriptor& d = obs.features[fi].descriptor;
    if (const auto it = exact.find(std::string(d.begin(), d.end())); it != exact.end()) {
      out.push_back({fi, it->second});
      continue;
    }
    int best = std::numeric_limits<int>::max();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < map.size(); ++i) {
      const int hd = hamming_distance(d, map[i].descriptor);
      if (hd < best) {
        best = hd;
        best_i = i;
      }
    }
    if (best <= cfg.max_descriptor_distance) out.push_back({fi, best_i});
  }
  return out;
}

PoseEstimate relocalize(const MapPointStore& map, const FrameObservation& obs, const CameraModel& cam,
                        const TrackingConfig& cfg, const std::optional<Pose>& hint) {
  if (map.empty()) throw Error(ErrorCode::kDegenerate, "relocalization map is empty");
  const auto matches = match_descriptors(obs, map, cfg);
  if (matches.size() < 6) {
    throw Error(ErrorCode::kDegenerate, "only " + std::to_string(matches.size()) + " descriptor matches");
  }
  const auto corr = to_correspondences(obs, matches, map);

  std::vector<Pose> seeds;
  if (hint) seeds.push_back(*hint);
  for (int k = 0; k < kRelocalizationSeeds; ++k) {
    const double yaw = 2.0 * std::numbers::pi * k / kRelocalizationSeeds;
    seeds.emplace_back(exp_so3(Eigen::Vector3d(0.0, yaw, 0.0)), Point3::Zero());
  }
  std::optional<PoseEstimate> best;
  for (const Pose& seed : seeds) {
    try {
      PoseEstimate est = estimate_pose(corr, cam, seed, cfg);
      if (!best || est.cost < best->cost) best = std::move(est);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
  }
  if (!best) throw Error(ErrorCode::kDegenerate, "no relocalization seed converged");
  return *best;
}

namespace {

constexpr std::array<char, 4> kMagic{'S', 'G', 'M', 'P'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw Error(ErrorCode::kParse, "truncated map file " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_map(const std::filesystem::path& path, const MapPointStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kMapFormatVersion);
  put<std::uint64_t>(out, store.size());
  for (const auto& p : store.points()) {
    put<double>(out, p.position.x());
    put<double>(out, p.position.y());
    put<double>(out, p.position.z());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.provenance));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.descriptor.size()));
    out.write(reinterpret_cast<const char*>(p.descriptor.data()), static_cast<std::streamsize>(p.descriptor.size()));
    put<std::uint32_t>(out, p.observation_count);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

MapPointStore load_map(const std::filesystem::path& path, double merge_radius) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::kParse, path.string() + " is not a map file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kMapFormatVersion) {
    throw Error(ErrorCode::kParse, "unsupported map version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, path);
  MapPointStore store(merge_radius);
  for (std::uint64_t i = 0; i < count; ++i) {
    MapPoint p;
    const double x = get<double>(in, path);
    const double y = get<double>(in, path);
    const double z = get<double>(in, path);
    p.position = Point3(x, y, z);
    const auto prov = get<std::uint8_t>(in, path);
    if (prov > 1) throw Error(ErrorCode::kParse, "bad provenance byte in " + path.string());
    p.provenance = static_cast<Provenance>(prov);
    const auto len = get<std::uint32_t>(in, path);
    if (len > (1u << 16)) throw Error(ErrorCode::kParse, "implausible descriptor length in " + path.string());
    p.descriptor.resize(len);
    in.read(reinterpret_cast<char*>(p.descriptor.data()), len);
    if (!in) throw Error(ErrorCode::kParse, "truncated map file " + path.string());
    p.observation_count = get<std::uint32_t>(in, path);
    if (p.observation_count == 0 || !p.position.allFinite()) {
      throw Error(ErrorCode::kParse, "invalid map point in " + path.string());
    }
    store.append_unchecked(std::move(p));
  }
  return store;
}

void save_map(const std::filesystem::path& path, const LongTermMap& ltm) { save_map(path, ltm.store()); }

LongTermMap load_long_term_map(const std::filesystem::path& path, double merge_radius) {
  const MapPointStore store = load_map(path, merge_radius);
  LongTermMap ltm(merge_radius);
  for (const auto& p : store.points()) ltm.insert(p);
  return ltm;
}

}  // namespace segslam
