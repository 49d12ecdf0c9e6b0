#include <gtest/gtest.h>

#include <random>

#include "sonomyo/error.hpp"
#include "sonomyo/normalization.hpp"

using namespace sonomyo;

namespace {

BoundTrackerParams small_window(std::size_t n) {
  BoundTrackerParams p;
  p.window_seconds = static_cast<double>(n) / p.nominal_rate;
  return p;
}

}  // namespace

TEST(Normalize, Definition) {
  const Bounds b{0.2, 0.6};
  EXPECT_DOUBLE_EQ(normalize(0.2, b), 0.0);
  EXPECT_DOUBLE_EQ(normalize(0.4, b), 0.5);
  EXPECT_DOUBLE_EQ(normalize(0.6 + 0.3 * 0.4, b), 1.0);
  EXPECT_DOUBLE_EQ(normalize(-3.0, b), 0.0);
}

TEST(Mapping, Orientation) {
  EXPECT_DOUBLE_EQ(map_to_cursor(0.0).position, 1.0);
  EXPECT_DOUBLE_EQ(map_to_cursor(0.5, Orientation::inverted).position, 0.5);
  EXPECT_DOUBLE_EQ(map_to_cursor(0.5, Orientation::direct).position, 0.5);
  EXPECT_DOUBLE_EQ(map_to_cursor(1.0, Orientation::direct).position, 1.0);
  const CursorSample c = map_to_cursor(0.25, Orientation::inverted, 3.5);
  EXPECT_EQ(c, (CursorSample{0.75, 0.25, 3.5}));
  EXPECT_EQ(parse_orientation("direct"), Orientation::direct);
  EXPECT_THROW(parse_orientation("sideways"), ConfigError);
}

TEST(BoundTracker, ExpandsImmediately) {
  BoundTracker t({0.2, 0.8}, {});
  EXPECT_EQ(t.update(0.9), (Bounds{0.2, 0.9}));
  EXPECT_EQ(t.update(0.1), (Bounds{0.1, 0.9}));
}

TEST(BoundTracker, ContractsOnlyWithFullWindow) {
  BoundTracker t({0.2, 0.8}, small_window(4));
  for (double v : {0.6, 0.3, 0.5, 0.4}) EXPECT_EQ(t.update(v), (Bounds{0.2, 0.8}));
  // Window {0.6, 0.3, 0.5, 0.4}: max 0.6 sits 0.2 inside upper (slack 0.03),
  // min 0.3 sits 0.1 inside lower.
  const Bounds b = t.update(0.5);
  EXPECT_DOUBLE_EQ(b.upper, 0.8 - 0.01 * (0.8 - 0.6));
  EXPECT_DOUBLE_EQ(b.upper, 0.798);
  EXPECT_DOUBLE_EQ(b.lower, 0.2 + 0.01 * (0.3 - 0.2));
}

TEST(BoundTracker, NoContractionInsideMargin) {
  BoundTracker t({0.2, 0.8}, small_window(3));
  for (double v : {0.78, 0.22, 0.5}) t.update(v);
  EXPECT_EQ(t.update(0.5), (Bounds{0.2, 0.8}));
}

TEST(BoundTracker, FrozenAndNonFinite) {
  BoundTrackerParams p;
  p.frozen = true;
  BoundTracker t({0.2, 0.8}, p);
  EXPECT_EQ(t.update(5.0), (Bounds{0.2, 0.8}));
  BoundTracker u({0.2, 0.8}, {});
  EXPECT_EQ(u.update(std::nan("")), (Bounds{0.2, 0.8}));
}

TEST(BoundTracker, ConstantStreamNeverInverts) {
  BoundTracker t({0.2, 0.8}, {});
  double prev_range = 0.6;
  for (int i = 0; i < 20000; ++i) {
    const Bounds& b = t.update(0.5);
    ASSERT_LT(b.lower, b.upper) << "step " << i;
    ASSERT_LE(b.range(), prev_range + 1e-15);
    prev_range = b.range();
  }
  EXPECT_LT(t.bounds().range(), 0.01);
  EXPECT_LE(t.bounds().lower, 0.5);
  EXPECT_GE(t.bounds().upper, 0.5);
}

TEST(BoundTracker, RandomSequencesKeepOrder) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int seq = 0; seq < 2000; ++seq) {
    const double a = u(rng), w = 1e-6 + u(rng) * 0.5;
    BoundTracker t({a, a + w}, small_window(2 + rng() % 50));
    const double centre = u(rng), spread = u(rng) * 0.1;
    for (int i = 0; i < 300; ++i) {
      const Bounds& b = t.update(centre + spread * (u(rng) - 0.5));
      ASSERT_LT(b.lower, b.upper);
    }
  }
}

TEST(BoundTracker, Validation) {
  EXPECT_THROW(BoundTracker({0.5, 0.5}, {}), ConfigError);
  BoundTrackerParams p;
  p.shrink_rate = 0.0;
  EXPECT_THROW(BoundTracker({0.0, 1.0}, p), ConfigError);
  p = {};
  p.window_seconds = 0.05;
  EXPECT_THROW(BoundTracker({0.0, 1.0}, p), ConfigError);
  EXPECT_EQ(BoundTrackerParams{}.window_capacity(), 200u);
}
