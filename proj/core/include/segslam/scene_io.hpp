#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "segslam/simulator.hpp"

namespace segslam {

// Scene files use a small TOML subset: `key = value` pairs with numbers,
// booleans, double-quoted strings and flat numeric arrays; `[table]`
// headers; `[[classes]]` / `[[objects]]` array-of-table headers; `#`
// comments. Recognised layout:
//
//   seed, noise_seed, n_background_points, background_min, background_max,
//   n_frames, fps, feature_noise_px, depth_noise, descriptor_bytes
//   [camera]       fx fy cx cy depth_factor image_scale width height
//   [trajectory]   kind = "arc": target radius start_angle end_angle bob
//                  kind = "tum": file (camera-to-world, relative to the scene file)
//   [second_pass]  offset_translation, offset_yaw (rad about y)
//   [[classes]]    id name moveable
//   [[objects]]    class_id center extents surface_points
//                  motion = "static" | "linear" | "relocated"
//                  velocity relocated_center
//
// Unknown keys are rejected with kParse.

SceneSpec parse_scene(const std::string& text, const std::filesystem::path& base_dir = {});
SceneSpec load_scene(const std::filesystem::path& path);
/// Writes every field, embedding explicit trajectories as a sibling TUM
/// file named `<stem>_trajectory.txt`.
void save_scene(const std::filesystem::path& path, const SceneSpec& spec);

}  // namespace segslam
