#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace segslam {

/// Fixed-size binary pixel grid. One byte per pixel; the grids here are
/// small enough that bit packing would only slow the morphology down.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool same_shape(const BinaryMask& o) const { return width_ == o.width_ && height_ == o.height_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool test(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool on = true) { bits_[index(x, y)] = on ? 1 : 0; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }

  /// Mean pixel coordinate (x, y). Undefined for an empty mask.
  Eigen::Vector2d barycenter() const;

  std::size_t intersection_count(const BinaryMask& o) const;
  std::size_t symmetric_difference_count(const BinaryMask& o) const;

  BinaryMask& operator|=(const BinaryMask& o);
  BinaryMask& operator&=(const BinaryMask& o);
  /// Removes every pixel set in `o`.
  BinaryMask& subtract(const BinaryMask& o);

  /// Square structuring element of side 2*radius+1.
  BinaryMask dilated(int radius) const;
  /// Pixels outside the grid count as set, so shapes touching the border
  /// are not eaten away.
  BinaryMask eroded(int radius) const;
  BinaryMask closed(int radius) const { return dilated(radius).eroded(radius); }

  const std::vector<std::uint8_t>& data() const { return bits_; }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace segslam
