#include <gtest/gtest.h>

#include "segslam/mask.hpp"
#include "segslam/random.hpp"

using namespace segslam;

namespace {

BinaryMask random_mask(Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, rng.bernoulli(density));
  return m;
}

// Blobby masks exercise morphology better than salt noise.
BinaryMask random_blobs(Rng& rng, int w, int h) {
  BinaryMask m(w, h);
  const int n = 1 + static_cast<int>(rng.below(4));
  for (int k = 0; k < n; ++k) {
    const int x0 = static_cast<int>(rng.below(w)), y0 = static_cast<int>(rng.below(h));
    const int bw = 1 + static_cast<int>(rng.below(w / 2 + 1)), bh = 1 + static_cast<int>(rng.below(h / 2 + 1));
    for (int y = y0; y < std::min(h, y0 + bh); ++y)
      for (int x = x0; x < std::min(w, x0 + bw); ++x) m.set(x, y, !rng.bernoulli(0.05));
  }
  return m;
}

BinaryMask naive_dilate(const BinaryMask& m, int r) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool on = false;
      for (int dy = -r; dy <= r && !on; ++dy)
        for (int dx = -r; dx <= r && !on; ++dx) on = m.in_bounds(x + dx, y + dy) && m.test(x + dx, y + dy);
      out.set(x, y, on);
    }
  return out;
}

BinaryMask naive_erode(const BinaryMask& m, int r) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool on = true;
      for (int dy = -r; dy <= r && on; ++dy)
        for (int dx = -r; dx <= r && on; ++dx) on = !m.in_bounds(x + dx, y + dy) || m.test(x + dx, y + dy);
      out.set(x, y, on);
    }
  return out;
}

}  // namespace

TEST(BinaryMask, CountAndBarycenter) {
  BinaryMask m(7, 5);
  EXPECT_TRUE(m.empty());
  m.set(1, 1);
  m.set(3, 1);
  m.set(2, 4);
  EXPECT_EQ(m.count(), 3u);
  const Eigen::Vector2d c = m.barycenter();
  EXPECT_DOUBLE_EQ(c.x(), 2.0);
  EXPECT_DOUBLE_EQ(c.y(), 2.0);
}

TEST(BinaryMask, WordOpsMatchNaive) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    // Odd widths put the tail bytes outside whole words.
    const int w = 1 + static_cast<int>(rng.below(45)), h = 1 + static_cast<int>(rng.below(30));
    const BinaryMask a = random_mask(rng, w, h, rng.uniform()), b = random_mask(rng, w, h, rng.uniform());
    std::size_t na = 0, inter = 0, sym = 0;
    double sx = 0, sy = 0;
    BinaryMask uni(w, h), isect(w, h), diff(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool pa = a.test(x, y), pb = b.test(x, y);
        if (pa) {
          ++na;
          sx += x;
          sy += y;
        }
        inter += pa && pb;
        sym += pa != pb;
        uni.set(x, y, pa || pb);
        isect.set(x, y, pa && pb);
        diff.set(x, y, pa && !pb);
      }
    EXPECT_EQ(a.count(), na);
    EXPECT_EQ(a.intersection_count(b), inter);
    EXPECT_EQ(a.symmetric_difference_count(b), sym);
    if (na > 0) {
      EXPECT_NEAR(a.barycenter().x(), sx / na, 1e-12);
      EXPECT_NEAR(a.barycenter().y(), sy / na, 1e-12);
    }
    BinaryMask u = a, i = a, d = a;
    u |= b;
    i &= b;
    d.subtract(b);
    EXPECT_EQ(u, uni);
    EXPECT_EQ(i, isect);
    EXPECT_EQ(d, diff);
  }
}

TEST(BinaryMask, LargeCountsDoNotOverflowByteLanes) {
  BinaryMask m(1000, 700);
  for (int y = 0; y < 700; ++y)
    for (int x = 0; x < 1000; ++x) m.set(x, y);
  EXPECT_EQ(m.count(), 700000u);
  EXPECT_NEAR(m.barycenter().x(), 499.5, 1e-9);
  EXPECT_NEAR(m.barycenter().y(), 349.5, 1e-9);
}

TEST(BinaryMask, MorphologyMatchesNaive) {
  Rng rng(37);
  for (int trial = 0; trial < 150; ++trial) {
    const int w = 1 + static_cast<int>(rng.below(40)), h = 1 + static_cast<int>(rng.below(30));
    const BinaryMask m = trial % 2 ? random_blobs(rng, w, h) : random_mask(rng, w, h, rng.uniform());
    const int r = static_cast<int>(rng.below(4));
    EXPECT_EQ(m.dilated(r), naive_dilate(m, r)) << "w=" << w << " h=" << h << " r=" << r;
    EXPECT_EQ(m.eroded(r), naive_erode(m, r)) << "w=" << w << " h=" << h << " r=" << r;
    EXPECT_EQ(m.closed(r), naive_erode(naive_dilate(m, r), r));
  }
}

TEST(BinaryMask, ClosingFillsSinglePixelHoles) {
  BinaryMask m(20, 20);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) m.set(x, y, x == 5 || y == 5 || x == 14 || y == 14 || (x + y) % 7 != 0);
  const BinaryMask c = m.closed(1);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) EXPECT_TRUE(c.test(x, y));
  EXPECT_FALSE(c.test(2, 2));
}

TEST(BinaryMask, ErosionKeepsShapesTouchingBorder) {
  BinaryMask m(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 4; ++x) m.set(x, y);
  const BinaryMask e = m.eroded(1);
  EXPECT_TRUE(e.test(0, 0));
  EXPECT_TRUE(e.test(2, 9));
  EXPECT_FALSE(e.test(3, 5));
}
