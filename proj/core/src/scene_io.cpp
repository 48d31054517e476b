#include "segslam/scene_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include <Eigen/Geometry>

#include "segslam/error.hpp"
#include "segslam/segmentation_io.hpp"

namespace segslam {
namespace {

using Value = std::variant<double, bool, std::string, std::vector<double>>;

struct Table {
  std::string name;
  int line = 0;
  std::map<std::string, Value> values;
  std::set<std::string> used;
};

[[noreturn]] void fail(int line, const std::string& what) {
  throw Error(ErrorCode::kParse, "scene line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

double parse_number(const std::string& text, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    fail(line, "bad number '" + text + "'");
  }
  if (used != text.size()) fail(line, "bad number '" + text + "'");
  return v;
}

Value parse_value(const std::string& text, int line) {
  if (text.empty()) fail(line, "missing value");
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') fail(line, "unterminated string");
    return text.substr(1, text.size() - 2);
  }
  if (text.front() == '[') {
    if (text.back() != ']') fail(line, "unterminated array");
    std::vector<double> out;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(parse_number(item, line));
    }
    return out;
  }
  return parse_number(text, line);
}

struct Document {
  Table root;
  std::map<std::string, Table> tables;
  std::map<std::string, std::vector<Table>> arrays;
};

Document parse_document(const std::string& text) {
  Document doc;
  Table* current = &doc.root;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.rfind("[[", 0) == 0) {
      if (s.size() < 4 || s.substr(s.size() - 2) != "]]") fail(line, "bad array-of-tables header");
      const std::string name = trim(s.substr(2, s.size() - 4));
      auto& list = doc.arrays[name];
      list.push_back(Table{name, line, {}, {}});
      current = &list.back();
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "bad table header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (doc.tables.count(name)) fail(line, "duplicate table [" + name + "]");
      current = &doc.tables[name];
      current->name = name;
      current->line = line;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) fail(line, "empty key");
    if (current->values.count(key)) fail(line, "duplicate key '" + key + "'");
    current->values.emplace(key, parse_value(trim(s.substr(eq + 1)), line));
  }
  return doc;
}

class Reader {
 public:
  explicit Reader(Table& t) : t_(t) {}

  template <typename T>
  const T* find(const std::string& key, const char* type) {
    const auto it = t_.values.find(key);
    if (it == t_.values.end()) return nullptr;
    t_.used.insert(key);
    const T* v = std::get_if<T>(&it->second);
    if (!v) fail(t_.line, where() + key + " must be " + type);
    return v;
  }

  double number(const std::string& key, double fallback) {
    const double* v = find<double>(key, "a number");
    return v ? *v : fallback;
  }

  template <typename Int>
  Int integer(const std::string& key, Int fallback) {
    const double* v = find<double>(key, "an integer");
    if (!v) return fallback;
    if (std::floor(*v) != *v || (*v < 0.0 && std::is_unsigned_v<Int>)) {
      fail(t_.line, where() + key + " must be an integer");
    }
    return static_cast<Int>(*v);
  }

  bool boolean(const std::string& key, bool fallback) {
    const bool* v = find<bool>(key, "true or false");
    return v ? *v : fallback;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const std::string* v = find<std::string>(key, "a string");
    return v ? *v : fallback;
  }

  Point3 vec3(const std::string& key, const Point3& fallback) {
    const auto* v = find<std::vector<double>>(key, "a 3-element array");
    if (!v) return fallback;
    if (v->size() != 3) fail(t_.line, where() + key + " must have 3 elements");
    return {(*v)[0], (*v)[1], (*v)[2]};
  }

  void finish() const {
    for (const auto& [key, value] : t_.values) {
      if (!t_.used.count(key)) fail(t_.line, where() + "unknown key '" + key + "'");
    }
  }

 private:
  std::string where() const { return t_.name.empty() ? std::string() : "[" + t_.name + "] "; }
  Table& t_;
};

ObjectMotion motion_from(const std::string& s, int line) {
  if (s == "static") return ObjectMotion::kStatic;
  if (s == "linear") return ObjectMotion::kLinearVelocity;
  if (s == "relocated") return ObjectMotion::kRelocatedBetweenPasses;
  fail(line, "unknown motion '" + s + "'");
}

const char* motion_name(ObjectMotion m) {
  switch (m) {
    case ObjectMotion::kStatic: return "static";
    case ObjectMotion::kLinearVelocity: return "linear";
    case ObjectMotion::kRelocatedBetweenPasses: return "relocated";
  }
  return "static";
}

std::string vec(const Point3& p) {
  std::ostringstream os;
  os << std::setprecision(17) << "[" << p.x() << ", " << p.y() << ", " << p.z() << "]";
  return os.str();
}

}  // namespace

SceneSpec parse_scene(const std::string& text, const std::filesystem::path& base_dir) {
  Document doc = parse_document(text);
  SceneSpec spec;

  Reader root(doc.root);
  spec.seed = root.integer<std::uint64_t>("seed", spec.seed);
  spec.noise_seed = root.integer<std::uint64_t>("noise_seed", spec.noise_seed);
  spec.n_background_points = root.integer<int>("n_background_points", spec.n_background_points);
  spec.background_min = root.vec3("background_min", spec.background_min);
  spec.background_max = root.vec3("background_max", spec.background_max);
  spec.n_frames = root.integer<int>("n_frames", spec.n_frames);
  spec.fps = root.number("fps", spec.fps);
  spec.feature_noise_px = root.number("feature_noise_px", spec.feature_noise_px);
  spec.depth_noise = root.number("depth_noise", spec.depth_noise);
  spec.descriptor_bytes = root.integer<int>("descriptor_bytes", spec.descriptor_bytes);
  root.finish();

  for (auto& [name, table] : doc.tables) {
    Reader r(table);
    if (name == "camera") {
      spec.cam.fx = r.number("fx", spec.cam.fx);
      spec.cam.fy = r.number("fy", spec.cam.fy);
      spec.cam.cx = r.number("cx", spec.cam.cx);
      spec.cam.cy = r.number("cy", spec.cam.cy);
      spec.cam.depth_factor = r.number("depth_factor", spec.cam.depth_factor);
      spec.cam.image_scale = r.number("image_scale", spec.cam.image_scale);
      spec.cam.width = r.integer<int>("width", spec.cam.width);
      spec.cam.height = r.integer<int>("height", spec.cam.height);
    } else if (name == "trajectory") {
      const std::string kind = r.string("kind", "arc");
      if (kind == "arc") {
        spec.arc.target = r.vec3("target", spec.arc.target);
        spec.arc.radius = r.number("radius", spec.arc.radius);
        spec.arc.start_angle = r.number("start_angle", spec.arc.start_angle);
        spec.arc.end_angle = r.number("end_angle", spec.arc.end_angle);
        spec.arc.bob = r.number("bob", spec.arc.bob);
      } else if (kind == "tum") {
        const std::string file = r.string("file", "");
        if (file.empty()) fail(table.line, "[trajectory] kind = \"tum\" needs file");
        for (const auto& sp : read_tum_trajectory(base_dir / file).poses) spec.trajectory.push_back(sp.pose);
      } else {
        fail(table.line, "unknown trajectory kind '" + kind + "'");
      }
    } else if (name == "second_pass") {
      const Point3 t = r.vec3("offset_translation", Point3::Zero());
      const double yaw = r.number("offset_yaw", 0.0);
      const Mat3 rot = Eigen::AngleAxisd(yaw, Point3::UnitY()).toRotationMatrix();
      spec.second_pass_offset = Pose(rot, t);
    } else {
      fail(table.line, "unknown table [" + name + "]");
    }
    r.finish();
  }

  for (auto& [name, list] : doc.arrays) {
    for (auto& table : list) {
      Reader r(table);
      if (name == "classes") {
        const auto id = r.find<double>("id", "an integer");
        if (!id) fail(table.line, "[[classes]] needs id");
        spec.classes.add(static_cast<int>(*id), r.string("name", ""), r.boolean("moveable", false));
      } else if (name == "objects") {
        ObjectSpec obj;
        obj.class_id = r.integer<int>("class_id", obj.class_id);
        obj.center = r.vec3("center", obj.center);
        obj.extents = r.vec3("extents", obj.extents);
        obj.surface_point_count = r.integer<int>("surface_points", obj.surface_point_count);
        obj.motion = motion_from(r.string("motion", "static"), table.line);
        obj.velocity = r.vec3("velocity", obj.velocity);
        obj.relocated_center = r.vec3("relocated_center", obj.relocated_center);
        spec.objects.push_back(obj);
      } else {
        fail(table.line, "unknown array [[" + name + "]]");
      }
      r.finish();
    }
  }
  spec.validate();
  return spec;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path.parent_path());
}

void save_scene(const std::filesystem::path& path, const SceneSpec& spec) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << std::setprecision(17);
  out << "seed = " << spec.seed << "\n"
      << "noise_seed = " << spec.noise_seed << "\n"
      << "n_background_points = " << spec.n_background_points << "\n"
      << "background_min = " << vec(spec.background_min) << "\n"
      << "background_max = " << vec(spec.background_max) << "\n"
      << "n_frames = " << spec.n_frames << "\n"
      << "fps = " << spec.fps << "\n"
      << "feature_noise_px = " << spec.feature_noise_px << "\n"
      << "depth_noise = " << spec.depth_noise << "\n"
      << "descriptor_bytes = " << spec.descriptor_bytes << "\n";
  out << "\n[camera]\n"
      << "fx = " << spec.cam.fx << "\nfy = " << spec.cam.fy << "\ncx = " << spec.cam.cx << "\ncy = " << spec.cam.cy
      << "\ndepth_factor = " << spec.cam.depth_factor << "\nimage_scale = " << spec.cam.image_scale
      << "\nwidth = " << spec.cam.width << "\nheight = " << spec.cam.height << "\n";
  out << "\n[trajectory]\n";
  if (spec.trajectory.empty()) {
    out << "kind = \"arc\"\ntarget = " << vec(spec.arc.target) << "\nradius = " << spec.arc.radius
        << "\nstart_angle = " << spec.arc.start_angle << "\nend_angle = " << spec.arc.end_angle
        << "\nbob = " << spec.arc.bob << "\n";
  } else {
    const std::string file = path.stem().string() + "_trajectory.txt";
    Trajectory traj;
    for (std::size_t i = 0; i < spec.trajectory.size(); ++i) {
      traj.poses.push_back({static_cast<double>(i) / spec.fps, spec.trajectory[i]});
    }
    write_tum_trajectory(path.parent_path() / file, traj);
    out << "kind = \"tum\"\nfile = \"" << file << "\"\n";
  }
  const Pose& off = spec.second_pass_offset;
  const double yaw = std::atan2(off.rotation()(0, 2), off.rotation()(0, 0));
  out << "\n[second_pass]\noffset_translation = " << vec(off.translation()) << "\noffset_yaw = " << yaw << "\n";
  for (const auto& [id, info] : spec.classes.entries()) {
    out << "\n[[classes]]\nid = " << id << "\nname = \"" << info.name << "\"\nmoveable = "
        << (info.moveable ? "true" : "false") << "\n";
  }
  for (const auto& obj : spec.objects) {
    out << "\n[[objects]]\nclass_id = " << obj.class_id << "\ncenter = " << vec(obj.center)
        << "\nextents = " << vec(obj.extents) << "\nsurface_points = " << obj.surface_point_count
        << "\nmotion = \"" << motion_name(obj.motion) << "\"\nvelocity = " << vec(obj.velocity)
        << "\nrelocated_center = " << vec(obj.relocated_center) << "\n";
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace segslam
