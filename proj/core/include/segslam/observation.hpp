#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "segslam/geometry.hpp"

namespace segslam {

/// Opaque binary feature descriptor compared by Hamming distance.
using Descriptor = std::vector<std::uint8_t>;

/// Number of differing bits. Descriptors of different length compare as
/// maximally distant.
int hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct Feature {
  Pixel pixel;
  double raw_depth = 0.0;  // sensor units; 0 = no depth
  Descriptor descriptor;
  /// Simulator ground-truth landmark id; only tests and diagnostics read it.
  std::optional<std::int64_t> landmark_hint;

  bool has_depth() const { return raw_depth > 0.0; }
};

struct FrameObservation {
  int frame_index = 0;
  double timestamp = 0.0;
  std::vector<Feature> features;
  DepthGrid depth;

  /// Throws kInvalidArgument if a feature lies outside `cam` or descriptor
  /// lengths disagree.
  void validate(const CameraModel& cam) const;
};

}  // namespace segslam
