#include "segslam/mask.hpp"

#include <algorithm>
#include <cstring>
#include <optional>

#include "segslam/error.hpp"

namespace segslam {
namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kDimensionMismatch, "mask sizes differ");
}

// Masks hold one 0/1 byte per pixel, so eight pixels fit in a word and
// their sum is the top byte of a multiplication by 0x0101...01.
constexpr std::uint64_t kByteOnes = 0x0101010101010101ull;
// Top byte of c * kByteIndexWeights is the sum of i * byte_i.
constexpr std::uint64_t kByteIndexWeights = 0x0001020304050607ull;

std::uint64_t load_word(const std::uint8_t* p) {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

std::uint64_t byte_sum(std::uint64_t c) { return (c * kByteOnes) >> 56; }

template <typename Op>
std::size_t reduce_bytes(const std::uint8_t* a, std::size_t n, Op op) {
  std::size_t total = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) total += byte_sum(op(load_word(a + i)));
  for (; i < n; ++i) total += op(std::uint64_t{a[i]});
  return total;
}

template <typename Op>
std::size_t reduce_pair(const std::uint8_t* a, const std::uint8_t* b, std::size_t n, Op op) {
  std::size_t total = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) total += byte_sum(op(load_word(a + i), load_word(b + i)));
  for (; i < n; ++i) total += op(std::uint64_t{a[i]}, std::uint64_t{b[i]});
  return total;
}

template <typename Op>
void combine_into(std::uint8_t* a, const std::uint8_t* b, std::size_t n, Op op) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint64_t v = op(load_word(a + i), load_word(b + i));
    std::memcpy(a + i, &v, sizeof v);
  }
  for (; i < n; ++i) a[i] = static_cast<std::uint8_t>(op(std::uint64_t{a[i]}, std::uint64_t{b[i]}) & 1u);
}

struct Window {
  int x0, y0, x1, y1;  // inclusive
};

// Bounding box of the set pixels, nullopt when none is set.
std::optional<Window> bounds(const std::vector<std::uint8_t>& bits, int w, int h) {
  std::optional<Window> b;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = bits.data() + static_cast<std::size_t>(y) * w;
    const auto* first = std::find(row, row + w, std::uint8_t{1});
    if (first == row + w) continue;
    const int lo = static_cast<int>(first - row);
    int hi = w - 1;
    while (!row[hi]) --hi;
    if (!b) {
      b = Window{lo, y, hi, y};
    } else {
      b->x0 = std::min(b->x0, lo);
      b->x1 = std::max(b->x1, hi);
      b->y1 = y;
    }
  }
  return b;
}

// Separable square min/max filter evaluated inside `win` only; the result
// is 0 elsewhere. `outside` is the value assumed beyond the grid border.
std::vector<std::uint8_t> box_filter(const std::vector<std::uint8_t>& in, int w, int h, int r,
                                     bool take_max, std::uint8_t outside, const Window& win) {
  std::vector<std::uint8_t> tmp(in.size()), out(in.size());
  auto combine = [take_max](std::uint8_t* dst, const std::uint8_t* src, int n) {
    if (take_max) {
      for (int i = 0; i < n; ++i) dst[i] = std::max(dst[i], src[i]);
    } else {
      for (int i = 0; i < n; ++i) dst[i] = std::min(dst[i], src[i]);
    }
  };
  auto combine_value = [take_max](std::uint8_t* dst, std::uint8_t v, int n) {
    for (int i = 0; i < n; ++i) dst[i] = take_max ? std::max(dst[i], v) : std::min(dst[i], v);
  };
  const std::uint8_t identity = take_max ? 0 : 1;
  const int n = win.x1 - win.x0 + 1;
  const int ty0 = std::max(0, win.y0 - r);
  const int ty1 = std::min(h - 1, win.y1 + r);
  for (int y = ty0; y <= ty1; ++y) {
    const std::uint8_t* src = in.data() + static_cast<std::size_t>(y) * w;
    std::uint8_t* dst = tmp.data() + static_cast<std::size_t>(y) * w + win.x0;
    std::fill(dst, dst + n, identity);
    for (int dx = -r; dx <= r; ++dx) {
      // Columns x in [win.x0, win.x1] read x + dx; split off the part beyond the border.
      const int lo = std::max(win.x0, -dx);
      const int hi = std::min(win.x1, w - 1 - dx);
      if (lo > hi) {
        combine_value(dst, outside, n);
        continue;
      }
      if (lo > win.x0) combine_value(dst, outside, lo - win.x0);
      combine(dst + (lo - win.x0), src + lo + dx, hi - lo + 1);
      if (hi < win.x1) combine_value(dst + (hi + 1 - win.x0), outside, win.x1 - hi);
    }
  }
  for (int y = win.y0; y <= win.y1; ++y) {
    std::uint8_t* dst = out.data() + static_cast<std::size_t>(y) * w + win.x0;
    std::fill(dst, dst + n, identity);
    for (int dy = -r; dy <= r; ++dy) {
      const int yy = y + dy;
      if (yy < 0 || yy >= h) {
        combine_value(dst, outside, n);
      } else {
        combine(dst, tmp.data() + static_cast<std::size_t>(yy) * w + win.x0, n);
      }
    }
  }
  return out;
}

}  // namespace

std::size_t BinaryMask::count() const {
  return reduce_bytes(bits_.data(), bits_.size(), [](std::uint64_t a) { return a; });
}

Eigen::Vector2d BinaryMask::barycenter() const {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < height_; ++y) {
    const std::uint8_t* row = bits_.data() + static_cast<std::size_t>(y) * width_;
    std::size_t row_n = 0;
    std::uint64_t row_x = 0;
    int x = 0;
    for (; x + 8 <= width_; x += 8) {
      const std::uint64_t c = load_word(row + x);
      if (!c) continue;
      const std::uint64_t k = byte_sum(c);
      row_n += k;
      row_x += k * static_cast<std::uint64_t>(x) + ((c * kByteIndexWeights) >> 56);
    }
    for (; x < width_; ++x) {
      row_n += row[x];
      row_x += static_cast<std::uint64_t>(row[x]) * x;
    }
    n += row_n;
    sx += static_cast<double>(row_x);
    sy += static_cast<double>(row_n) * y;
  }
  if (n == 0) return {0.0, 0.0};
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

std::size_t BinaryMask::intersection_count(const BinaryMask& o) const {
  require_same_shape(*this, o);
  return reduce_pair(bits_.data(), o.bits_.data(), bits_.size(), [](std::uint64_t a, std::uint64_t b) { return a & b; });
}

std::size_t BinaryMask::symmetric_difference_count(const BinaryMask& o) const {
  require_same_shape(*this, o);
  return reduce_pair(bits_.data(), o.bits_.data(), bits_.size(), [](std::uint64_t a, std::uint64_t b) { return a ^ b; });
}

BinaryMask& BinaryMask::operator|=(const BinaryMask& o) {
  require_same_shape(*this, o);
  combine_into(bits_.data(), o.bits_.data(), bits_.size(), [](std::uint64_t a, std::uint64_t b) { return a | b; });
  return *this;
}

BinaryMask& BinaryMask::operator&=(const BinaryMask& o) {
  require_same_shape(*this, o);
  combine_into(bits_.data(), o.bits_.data(), bits_.size(), [](std::uint64_t a, std::uint64_t b) { return a & b; });
  return *this;
}

BinaryMask& BinaryMask::subtract(const BinaryMask& o) {
  require_same_shape(*this, o);
  combine_into(bits_.data(), o.bits_.data(), bits_.size(), [](std::uint64_t a, std::uint64_t b) { return a & ~b; });
  return *this;
}

BinaryMask BinaryMask::dilated(int radius) const {
  BinaryMask out(width_, height_);
  const auto b = bounds(bits_, width_, height_);
  if (!b) return out;
  const Window win{std::max(0, b->x0 - radius), std::max(0, b->y0 - radius), std::min(width_ - 1, b->x1 + radius),
                   std::min(height_ - 1, b->y1 + radius)};
  out.bits_ = box_filter(bits_, width_, height_, radius, true, 0, win);
  return out;
}

BinaryMask BinaryMask::eroded(int radius) const {
  BinaryMask out(width_, height_);
  const auto b = bounds(bits_, width_, height_);
  if (!b) return out;
  out.bits_ = box_filter(bits_, width_, height_, radius, false, 1, *b);
  return out;
}

}  // namespace segslam
