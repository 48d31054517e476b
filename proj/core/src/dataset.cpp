#include "segslam/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "segslam/config.hpp"
#include "segslam/error.hpp"
#include "segslam/pgm.hpp"
#include "segslam/scene_io.hpp"
#include "segslam/segmentation_io.hpp"

namespace fs = std::filesystem;

namespace segslam {
namespace {

std::string to_hex(const Descriptor& d) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(d.size() * 2);
  for (const auto b : d) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Descriptor from_hex(const std::string& s, const fs::path& path, int line) {
  if (s.size() % 2 != 0) throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line) + ": odd hex length");
  Descriptor d(s.size() / 2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto [ptr, ec] = std::from_chars(s.data() + 2 * i, s.data() + 2 * i + 2, d[i], 16);
    if (ec != std::errc() || ptr != s.data() + 2 * i + 2) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line) + ": bad descriptor hex");
    }
  }
  return d;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

}  // namespace

BundleSource::BundleSource(const GroundTruthBundle& bundle, std::size_t max_frames)
    : b_(bundle), n_(std::min(max_frames, bundle.n_frames())) {
  gt_.poses.assign(bundle.trajectory.poses.begin(),
                   bundle.trajectory.poses.begin() + static_cast<std::ptrdiff_t>(std::min(n_, bundle.trajectory.size())));
}

std::string frame_stem(int frame_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", frame_index);
  return buf;
}

void write_features(const fs::path& path, const FrameObservation& obs) {
  auto out = open_out(path);
  char buf[96];
  for (const auto& f : obs.features) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g ", f.pixel.u, f.pixel.v, f.raw_depth);
    out << buf << (f.descriptor.empty() ? "-" : to_hex(f.descriptor)) << ' '
        << (f.landmark_hint ? *f.landmark_hint : -1) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

std::vector<Feature> read_features(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Feature> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Feature f;
    std::string hex;
    long long id = -1;
    if (!(ss >> f.pixel.u >> f.pixel.v >> f.raw_depth >> hex)) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(n) + ": expected u v raw_depth descriptor");
    }
    if (hex != "-") f.descriptor = from_hex(hex, path, n);
    if (ss >> id && id >= 0) f.landmark_hint = id;
    out.push_back(std::move(f));
  }
  return out;
}

void write_depth(const fs::path& path, const DepthGrid& depth) {
  GrayImage img;
  img.width = depth.width;
  img.height = depth.height;
  img.maxval = 65535;
  img.pixels = depth.raw;
  write_pgm(path, img);
}

DepthGrid read_depth(const fs::path& path) {
  GrayImage img = read_pgm(path);
  DepthGrid d(img.width, img.height);
  d.raw = std::move(img.pixels);
  return d;
}

void write_dataset(const fs::path& dir, const GroundTruthBundle& bundle, const SceneSpec* scene) {
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "masks");
  {
    auto out = open_out(dir / "camera.cfg");
    write_camera_config(out, bundle.cam);
  }
  write_class_table(dir / "classes.csv", bundle.classes);
  {
    auto out = open_out(dir / "frames.txt");
    char buf[64];
    for (const auto& obs : bundle.observations) {
      std::snprintf(buf, sizeof buf, "%d %.17g\n", obs.frame_index, obs.timestamp);
      out << buf;
    }
  }
  write_tum_trajectory(dir / "groundtruth.txt", bundle.trajectory);
  for (std::size_t i = 0; i < bundle.n_frames(); ++i) {
    const auto& obs = bundle.observations[i];
    const std::string stem = frame_stem(obs.frame_index);
    write_features(dir / "features" / (stem + ".txt"), obs);
    write_depth(dir / "depth" / (stem + ".pgm"), obs.depth);
    write_segmentation(dir / "masks" / (stem + ".pgm"), dir / "masks" / (stem + ".txt"), bundle.segmentations[i]);
  }
  if (scene) save_scene(dir / "scene.toml", *scene);
}

DatasetSource::DatasetSource(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw Error(ErrorCode::kIo, "dataset directory " + dir_.string() + " does not exist");
  cam_ = camera_from_config(KeyValueConfig::load(dir_ / "camera.cfg"), CameraModel{});
  if (fs::exists(dir_ / "classes.csv")) classes_ = read_class_table(dir_ / "classes.csv");
  auto in = open_in(dir_ / "frames.txt");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int idx = 0;
    double ts = 0.0;
    if (!(ss >> idx >> ts)) throw Error(ErrorCode::kParse, "frames.txt:" + std::to_string(n) + ": expected index timestamp");
    frames_.emplace_back(idx, ts);
  }
  if (fs::exists(dir_ / "groundtruth.txt")) gt_ = read_tum_trajectory(dir_ / "groundtruth.txt");
}

FrameObservation DatasetSource::observation(std::size_t i) const {
  const auto& [idx, ts] = frames_.at(i);
  const std::string stem = frame_stem(idx);
  FrameObservation obs;
  obs.frame_index = idx;
  obs.timestamp = ts;
  obs.features = read_features(dir_ / "features" / (stem + ".txt"));
  const fs::path depth = dir_ / "depth" / (stem + ".pgm");
  obs.depth = fs::exists(depth) ? read_depth(depth) : DepthGrid(cam_.width, cam_.height);
  if (obs.depth.width != cam_.width || obs.depth.height != cam_.height) {
    throw Error(ErrorCode::kDimensionMismatch, "depth image " + depth.string() + " does not match the camera");
  }
  obs.validate(cam_);
  return obs;
}

FrameSegmentation DatasetSource::segmentation(std::size_t i) const {
  const int idx = frames_.at(i).first;
  const std::string stem = frame_stem(idx);
  const fs::path pgm = dir_ / "masks" / (stem + ".pgm");
  if (!fs::exists(pgm)) return FrameSegmentation(idx, cam_.width, cam_.height);
  return read_segmentation(pgm, dir_ / "masks" / (stem + ".txt"), idx);
}

}  // namespace segslam
