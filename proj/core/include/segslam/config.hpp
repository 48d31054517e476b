#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "segslam/geometry.hpp"

namespace segslam {

/// Flat `key = value` settings file. Blank lines and `#` comments are
/// ignored; later keys override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Copies every entry of `other` over this one.
  void merge(const KeyValueConfig& other);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Reads fx, fy, cx, cy, depth_factor, image_scale, width, height; missing
/// keys keep the values of `defaults`. The result is validated.
CameraModel camera_from_config(const KeyValueConfig& cfg, const CameraModel& defaults = {});
void write_camera_config(std::ostream& os, const CameraModel& cam);

}  // namespace segslam
