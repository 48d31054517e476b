#pragma once

#include <filesystem>

#include "segslam/segmentation.hpp"

namespace segslam {

// Mask files: one PGM per frame holding instance_id + 1 per pixel (0 is
// background) and a sidecar text file with one `instance_id class_id
// [confidence]` line per region.

void write_segmentation(const std::filesystem::path& pgm_path, const std::filesystem::path& sidecar_path,
                        const FrameSegmentation& seg);

FrameSegmentation read_segmentation(const std::filesystem::path& pgm_path,
                                    const std::filesystem::path& sidecar_path, int frame_index);

/// `class_id,name,moveable` per line; `#` starts a comment.
ClassTable read_class_table(const std::filesystem::path& path);
void write_class_table(const std::filesystem::path& path, const ClassTable& table);

}  // namespace segslam
