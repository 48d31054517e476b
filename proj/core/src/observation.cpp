#include "segslam/observation.hpp"

#include <algorithm>
#include <cstring>
#include <bit>

#include "segslam/error.hpp"

#if defined(__x86_64__) && defined(__GNUC__) && defined(__linux__)
#define SEGSLAM_POPCNT_CLONES __attribute__((target_clones("popcnt", "default")))
#else
#define SEGSLAM_POPCNT_CLONES
#endif

namespace segslam {

SEGSLAM_POPCNT_CLONES
int hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) return static_cast<int>(8 * std::max(a.size(), b.size()));
  int d = 0;
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    std::uint64_t x, y;
    std::memcpy(&x, a.data() + i, 8);
    std::memcpy(&y, b.data() + i, 8);
    d += std::popcount(x ^ y);
  }
  for (; i < a.size(); ++i) d += std::popcount(static_cast<unsigned>(a[i] ^ b[i]));
  return d;
}

void FrameObservation::validate(const CameraModel& cam) const {
  std::optional<std::size_t> len;
  for (const auto& f : features) {
    if (!cam.contains(f.pixel)) throw Error(ErrorCode::kInvalidArgument, "feature outside the image");
    if (!len) len = f.descriptor.size();
    if (*len != f.descriptor.size()) throw Error(ErrorCode::kInvalidArgument, "descriptor lengths differ");
  }
  if (depth.width != 0 && (depth.width != cam.width || depth.height != cam.height)) {
    throw Error(ErrorCode::kDimensionMismatch, "depth grid does not match camera size");
  }
}

}  // namespace segslam
