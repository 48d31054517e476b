#pragma once

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "segslam/geometry.hpp"
#include "segslam/random.hpp"

namespace segslam::testing {

inline const nlohmann::json& oracle() {
  static const nlohmann::json j = [] {
    std::ifstream is(std::filesystem::path(SEGSLAM_TEST_DATA_DIR) / "oracle_values.json");
    return nlohmann::json::parse(is);
  }();
  return j;
}

inline Pose random_pose(Rng& rng, double max_angle = 3.0, double max_t = 2.0) {
  const Point3 axis = Point3(rng.normal(), rng.normal(), rng.normal()).normalized();
  const Point3 t(rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t));
  return Pose(exp_so3(axis * rng.uniform(0.0, max_angle)), t);
}

inline CameraModel small_camera() {
  CameraModel c;
  c.fx = c.fy = 500.0;
  c.cx = 320.0;
  c.cy = 240.0;
  c.depth_factor = 1000.0;
  return c;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("segslam_test_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace segslam::testing
