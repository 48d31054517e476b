#include "segslam/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include <Eigen/Geometry>

#include "segslam/error.hpp"
#include "segslam/random.hpp"

namespace segslam {
namespace {

// Landmarks closer than this to the camera are never emitted.
constexpr double kNearPlane = 0.1;
// Slack when testing a landmark against the ray-cast box depth.
constexpr double kDepthTolerance = 0.02;

Pose look_at(const Point3& eye, const Point3& target) {
  const Point3 z = (target - eye).normalized();
  const Point3 up(0.0, -1.0, 0.0);
  const Point3 x = z.cross(up).normalized();
  const Point3 y = z.cross(x);
  Mat3 cam_to_world;
  cam_to_world.col(0) = x;
  cam_to_world.col(1) = y;
  cam_to_world.col(2) = z;
  const Mat3 r = cam_to_world.transpose();
  return Pose(r, -r * eye);
}

struct Layout {
  std::vector<Point3> background;
  // Per object: landmark offsets from the box center.
  std::vector<std::vector<Point3>> object_offsets;
  std::vector<Descriptor> descriptors;
  std::vector<int> owner;
};

Layout make_layout(const SceneSpec& spec) {
  Layout lay;
  Rng rng(mix_seed(spec.seed, 1));
  for (int i = 0; i < spec.n_background_points; ++i) {
    lay.background.emplace_back(rng.uniform(spec.background_min.x(), spec.background_max.x()),
                                rng.uniform(spec.background_min.y(), spec.background_max.y()),
                                rng.uniform(spec.background_min.z(), spec.background_max.z()));
    lay.owner.push_back(-1);
  }
  for (std::size_t k = 0; k < spec.objects.size(); ++k) {
    const ObjectSpec& obj = spec.objects[k];
    const Point3 h = 0.5 * obj.extents;
    // Face pairs normal to x, y, z, picked proportionally to area.
    const double areas[3] = {obj.extents.y() * obj.extents.z(), obj.extents.x() * obj.extents.z(),
                             obj.extents.x() * obj.extents.y()};
    const double total = areas[0] + areas[1] + areas[2];
    std::vector<Point3> offsets;
    for (int i = 0; i < obj.surface_point_count; ++i) {
      double pick = rng.uniform() * total;
      int axis = 0;
      while (axis < 2 && pick >= areas[axis]) pick -= areas[axis++];
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      Point3 p(rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()), rng.uniform(-h.z(), h.z()));
      p[axis] = sign * h[axis];
      offsets.push_back(p);
      lay.owner.push_back(static_cast<int>(k));
    }
    lay.object_offsets.push_back(std::move(offsets));
  }
  const std::size_t total_landmarks = lay.owner.size();
  lay.descriptors.resize(total_landmarks);
  for (auto& d : lay.descriptors) {
    d.resize(static_cast<std::size_t>(spec.descriptor_bytes));
    for (auto& byte : d) byte = static_cast<std::uint8_t>(rng.next_u64() & 0xFF);
  }
  return lay;
}

Point3 object_center(const ObjectSpec& obj, double t, bool second) {
  switch (obj.motion) {
    case ObjectMotion::kStatic: return obj.center;
    case ObjectMotion::kLinearVelocity: return obj.center + obj.velocity * t;
    case ObjectMotion::kRelocatedBetweenPasses: return second ? obj.relocated_center : obj.center;
  }
  return obj.center;
}

// Entry distance of the ray (origin o, direction d) into the box, or
// nullopt if it misses or starts inside.
std::optional<double> ray_box(const Point3& o, const Point3& d, const Point3& lo, const Point3& hi) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= 0.0) return std::nullopt;
  return t0;
}

// Gives every background pixel the depth of the nearest (city-block
// distance) background landmark pixel, so the grid is dense like a sensor's.
void fill_background_depth(DepthGrid& depth, const std::vector<int>& labels) {
  const int w = depth.width;
  const int h = depth.height;
  constexpr int kFar = std::numeric_limits<int>::max() / 2;
  std::vector<int> dist(labels.size(), kFar);
  std::vector<std::uint16_t> nearest(labels.size(), 0);
  for (std::size_t idx = 0; idx < labels.size(); ++idx) {
    if (labels[idx] < 0 && depth.raw[idx] != 0) {
      dist[idx] = 0;
      nearest[idx] = depth.raw[idx];
    }
  }
  auto relax = [&](std::size_t idx, std::size_t from) {
    if (dist[from] + 1 < dist[idx]) {
      dist[idx] = dist[from] + 1;
      nearest[idx] = nearest[from];
    }
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (x > 0) relax(idx, idx - 1);
      if (y > 0) relax(idx, idx - w);
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (x + 1 < w) relax(idx, idx + 1);
      if (y + 1 < h) relax(idx, idx + w);
    }
  }
  for (std::size_t idx = 0; idx < labels.size(); ++idx) {
    if (labels[idx] < 0) depth.raw[idx] = nearest[idx];
  }
}

GroundTruthBundle generate_pass(const SceneSpec& spec, bool second) {
  spec.validate();
  const Layout lay = make_layout(spec);
  const CameraModel& cam = spec.cam;
  const int w = cam.width;
  const int h = cam.height;
  const std::uint64_t noise_seed = spec.noise_seed == 0 ? spec.seed : spec.noise_seed;

  GroundTruthBundle out;
  out.cam = cam;
  out.classes = spec.classes;
  out.landmark_object = lay.owner;

  for (int f = 0; f < spec.n_frames; ++f) {
    const double t = f / spec.fps;
    Pose pose = camera_pose(spec, f);
    if (second) pose = compose(pose, invert(spec.second_pass_offset));
    const Point3 eye = pose.center();
    const Mat3 rt = pose.rotation().transpose();

    std::vector<Point3> centers;
    for (const auto& obj : spec.objects) centers.push_back(object_center(obj, t, second));

    std::vector<Point3> world = lay.background;
    for (std::size_t k = 0; k < spec.objects.size(); ++k) {
      for (const auto& off : lay.object_offsets[k]) world.push_back(centers[k] + off);
    }

    // Ray-cast the boxes for labels and depth.
    std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);
    std::vector<double> zbuf(labels.size(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < spec.objects.size(); ++k) {
      const Point3 half = 0.5 * spec.objects[k].extents;
      const Point3 lo = centers[k] - half;
      const Point3 hi = centers[k] + half;
      int u0 = 0, v0 = 0, u1 = w - 1, v1 = h - 1;
      bool all_front = true;
      double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
      for (int c = 0; c < 8; ++c) {
        const Point3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
        const Point3 q = pose.apply(corner);
        if (q.z() <= kNearPlane) {
          all_front = false;
          break;
        }
        const double s = cam.image_scale * q.z();
        const double u = (cam.fx * q.x() + cam.cx * q.z()) / s;
        const double v = (cam.fy * q.y() + cam.cy * q.z()) / s;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
      if (all_front) {
        u0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
        v0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
        u1 = std::min(w - 1, static_cast<int>(std::ceil(umax)) + 1);
        v1 = std::min(h - 1, static_cast<int>(std::ceil(vmax)) + 1);
      }
      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) {
          const Point3 d_cam((u * cam.image_scale - cam.cx) / cam.fx, (v * cam.image_scale - cam.cy) / cam.fy, 1.0);
          const auto hit = ray_box(eye, rt * d_cam, lo, hi);
          if (!hit) continue;
          const std::size_t idx = static_cast<std::size_t>(v) * w + u;
          // d_cam has unit z, so the ray parameter is the camera depth.
          if (*hit < zbuf[idx]) {
            zbuf[idx] = *hit;
            labels[idx] = static_cast<int>(k);
          }
        }
      }
    }

    // Visibility test per landmark, then nearest-wins per pixel.
    std::unordered_map<std::size_t, std::pair<double, std::size_t>> winners;
    std::vector<Point3> cam_points(world.size());
    std::vector<Pixel> pixels(world.size());
    for (std::size_t id = 0; id < world.size(); ++id) {
      const Point3 q = pose.apply(world[id]);
      cam_points[id] = q;
      if (q.z() <= kNearPlane) continue;
      const double s = cam.image_scale * q.z();
      const Pixel px{(cam.fx * q.x() + cam.cx * q.z()) / s, (cam.fy * q.y() + cam.cy * q.z()) / s};
      if (!cam.contains(px)) continue;
      pixels[id] = px;
      const int iu = std::min(w - 1, static_cast<int>(std::lround(px.u)));
      const int iv = std::min(h - 1, static_cast<int>(std::lround(px.v)));
      const std::size_t idx = static_cast<std::size_t>(iv) * w + iu;
      const int owner = lay.owner[id];
      bool visible;
      if (owner < 0) {
        visible = labels[idx] < 0 || q.z() < zbuf[idx];
      } else {
        visible = labels[idx] == owner && q.z() <= zbuf[idx] + kDepthTolerance;
      }
      if (!visible) continue;
      auto [it, fresh] = winners.try_emplace(idx, q.z(), id);
      if (!fresh && q.z() < it->second.first) it->second = {q.z(), id};
    }
    std::vector<std::size_t> visible_ids;
    visible_ids.reserve(winners.size());
    for (const auto& [idx, zw] : winners) visible_ids.push_back(zw.second);
    std::sort(visible_ids.begin(), visible_ids.end());

    FrameObservation obs;
    obs.frame_index = f;
    obs.timestamp = t;
    obs.depth = DepthGrid(w, h);
    auto to_raw = [&](double z) {
      return static_cast<std::uint16_t>(std::clamp(std::lround(z * cam.depth_factor), 0L, 65535L));
    };
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
      if (labels[idx] >= 0) obs.depth.raw[idx] = to_raw(zbuf[idx]);
    }
    for (const auto& [idx, zw] : winners) {
      if (labels[idx] < 0) obs.depth.raw[idx] = to_raw(zw.first);
    }
    fill_background_depth(obs.depth, labels);

    Rng noise(mix_seed(noise_seed, (second ? 0x100000000ull : 0ull) + static_cast<std::uint64_t>(f) + 7));
    for (const std::size_t id : visible_ids) {
      const double du = noise.normal(0.0, 1.0) * spec.feature_noise_px;
      const double dv = noise.normal(0.0, 1.0) * spec.feature_noise_px;
      const double dz = noise.normal(0.0, 1.0) * spec.depth_noise;
      Feature feat;
      feat.pixel = {pixels[id].u + du, pixels[id].v + dv};
      if (!cam.contains(feat.pixel)) continue;
      feat.raw_depth = (cam_points[id].z() + dz) * cam.depth_factor;
      if (!(feat.raw_depth > 0.0)) continue;
      feat.descriptor = lay.descriptors[id];
      feat.landmark_hint = static_cast<std::int64_t>(id);
      obs.features.push_back(std::move(feat));
    }

    FrameSegmentation seg(f, w, h);
    for (std::size_t k = 0; k < spec.objects.size(); ++k) {
      SegmentedRegion r;
      r.instance_id = static_cast<int>(k);
      r.class_id = spec.objects[k].class_id;
      r.mask = BinaryMask(w, h);
      bool any = false;
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          if (labels[static_cast<std::size_t>(v) * w + u] == static_cast<int>(k)) {
            r.mask.set(u, v);
            any = true;
          }
        }
      }
      if (!any) continue;
      if (const ClassInfo* info = spec.classes.find(r.class_id)) r.moveable = info->moveable;
      seg.regions.push_back(std::move(r));
    }

    out.observations.push_back(std::move(obs));
    out.segmentations.push_back(std::move(seg));
    out.trajectory.poses.push_back({t, pose});
    out.landmark_positions.push_back(std::move(world));
  }
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::kInvalidSpec, why); };
  if (n_frames < 2) bad("n_frames must be at least 2");
  if (!(fps > 0)) bad("fps must be positive");
  if (!(feature_noise_px >= 0) || !(depth_noise >= 0)) bad("noise standard deviations must be non-negative");
  if (n_background_points < 0) bad("n_background_points must be non-negative");
  if (descriptor_bytes < 1) bad("descriptor_bytes must be positive");
  if (!(background_min.array() <= background_max.array()).all()) bad("background volume is inverted");
  if (!trajectory.empty() && static_cast<int>(trajectory.size()) != n_frames) {
    bad("explicit trajectory length must equal n_frames");
  }
  if (trajectory.empty() && !(arc.radius > 0)) bad("arc radius must be positive");
  for (const auto& obj : objects) {
    if (!(obj.extents.array() > 0).all()) bad("object extents must be positive");
    if (obj.surface_point_count < 4) bad("objects need at least 4 surface points");
    if (!classes.empty() && !classes.find(obj.class_id)) bad("object class missing from class table");
  }
  try {
    cam.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
}

Pose camera_pose(const SceneSpec& spec, int frame) {
  if (!spec.trajectory.empty()) return spec.trajectory.at(static_cast<std::size_t>(frame));
  const ArcTrajectory& arc = spec.arc;
  const double s = spec.n_frames > 1 ? static_cast<double>(frame) / (spec.n_frames - 1) : 0.0;
  const double theta = arc.start_angle + (arc.end_angle - arc.start_angle) * s;
  const Point3 eye = arc.target + arc.radius * Point3(std::sin(theta), 0.0, -std::cos(theta)) +
                     Point3(0.0, arc.bob * std::sin(2.0 * std::numbers::pi * s), 0.0);
  return look_at(eye, arc.target);
}

GroundTruthBundle generate(const SceneSpec& spec) { return generate_pass(spec, false); }

GroundTruthBundle second_pass(const SceneSpec& spec) {
  const bool any = std::any_of(spec.objects.begin(), spec.objects.end(), [](const ObjectSpec& o) {
    return o.motion == ObjectMotion::kRelocatedBetweenPasses;
  });
  if (!any) throw Error(ErrorCode::kInvalidSpec, "second pass needs at least one relocated object");
  return generate_pass(spec, true);
}

}  // namespace segslam
