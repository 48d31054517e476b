#include "segslam/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "segslam/error.hpp"

namespace segslam {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(key);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, "key '" + key + "' is not a number: " + *v);
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw Error(ErrorCode::kParse, "key '" + key + "' is not an integer: " + *v);
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw Error(ErrorCode::kParse, "key '" + key + "' is not a boolean: " + *v);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

CameraModel camera_from_config(const KeyValueConfig& cfg, const CameraModel& defaults) {
  CameraModel cam = defaults;
  cam.fx = cfg.get_double("fx", cam.fx);
  cam.fy = cfg.get_double("fy", cam.fy);
  cam.cx = cfg.get_double("cx", cam.cx);
  cam.cy = cfg.get_double("cy", cam.cy);
  cam.depth_factor = cfg.get_double("depth_factor", cam.depth_factor);
  cam.image_scale = cfg.get_double("image_scale", cam.image_scale);
  cam.width = cfg.get_int("width", cam.width);
  cam.height = cfg.get_int("height", cam.height);
  cam.validate();
  return cam;
}

void write_camera_config(std::ostream& os, const CameraModel& cam) {
  os << std::setprecision(17);
  os << "fx = " << cam.fx << "\n"
     << "fy = " << cam.fy << "\n"
     << "cx = " << cam.cx << "\n"
     << "cy = " << cam.cy << "\n"
     << "depth_factor = " << cam.depth_factor << "\n"
     << "image_scale = " << cam.image_scale << "\n"
     << "width = " << cam.width << "\n"
     << "height = " << cam.height << "\n";
}

}  // namespace segslam
