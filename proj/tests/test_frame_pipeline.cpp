#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sonomyo/error.hpp"
#include "sonomyo/frame_pipeline.hpp"
#include "support.hpp"

using namespace sonomyo;
using sonomyo::test::constant_frame;
using sonomyo::test::random_frame;

namespace {

// Plain double loop over the textbook formula.
double scalar_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

std::vector<double> as_doubles(const Frame& f) { return {f.pixels.begin(), f.pixels.end()}; }

}  // namespace

TEST(Kernel, MatchesValuesFrozenFromHandEvaluation) {
  // exp(0), exp(-2), exp(-4) for center, edge, corner, normalized by
  // 1 + 4 e^-2 + 4 e^-4.
  const double z = 1.0 + 4.0 * std::exp(-2.0) + 4.0 * std::exp(-4.0);
  const auto k = gaussian_kernel3x3(0.5);
  EXPECT_NEAR(k[4], 1.0 / z, 1e-15);
  EXPECT_NEAR(k[1], std::exp(-2.0) / z, 1e-15);
  EXPECT_NEAR(k[0], std::exp(-4.0) / z, 1e-15);
  EXPECT_NEAR(k[4], 0.619347, 1e-6);
  EXPECT_NEAR(k[1], 0.083819, 1e-6);
  EXPECT_NEAR(k[0], 0.011344, 1e-6);
  double sum = 0;
  for (double w : k) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(Smoothing, ImpulseResponseIsTheKernel) {
  Frame f = constant_frame(7, 6, 0);
  f.pixels[3 * 7 + 2] = 1;
  const FilteredFrame out = gaussian_smooth(f);
  const auto k = gaussian_kernel3x3(0.5);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const int dx = x - 2, dy = y - 3;
      const double want = (std::abs(dx) <= 1 && std::abs(dy) <= 1) ? k[(dy + 1) * 3 + (dx + 1)] : 0.0;
      EXPECT_NEAR(out.at(x, y), want, 1e-10) << x << "," << y;
    }
  }
}

TEST(Smoothing, ConstantImageIsUnchanged) {
  const FilteredFrame out = gaussian_smooth(constant_frame(5, 4, 128));
  for (double v : out.values) EXPECT_NEAR(v, 128.0, 1e-12);
}

TEST(Smoothing, ReplicatePaddingAtCorner) {
  // Impulse in the corner: replicated neighbours fold weight back in.
  Frame f = constant_frame(4, 4, 0);
  f.pixels[0] = 100;
  const FilteredFrame out = gaussian_smooth(f);
  // Separable 1-D weights: c = e^0 / s, e = e^-2 / s, s = 1 + 2 e^-2.
  const double s = 1.0 + 2.0 * std::exp(-2.0);
  const double c = 1.0 / s, e = std::exp(-2.0) / s;
  EXPECT_NEAR(out.at(0, 0), 100.0 * (c + e) * (c + e), 1e-10);
  EXPECT_NEAR(out.at(1, 0), 100.0 * e * (c + e), 1e-10);
  EXPECT_NEAR(out.at(1, 1), 100.0 * e * e, 1e-10);
  EXPECT_NEAR(out.at(2, 2), 0.0, 1e-12);
}

TEST(Smoothing, RejectsMalformedFrames) {
  Frame bad{3, 3, std::vector<std::uint8_t>(8), 0.0};
  EXPECT_THROW(gaussian_smooth(bad), InvalidFrameError);
  EXPECT_THROW(gaussian_smooth(constant_frame(2, 5, 0)), InvalidFrameError);
}

TEST(Pearson, MatchesScalarOracleOnRandomImages) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const int w = 3 + static_cast<int>(rng() % 12), h = 3 + static_cast<int>(rng() % 12);
    const Frame a = random_frame(w, h, rng), b = random_frame(w, h, rng);
    EXPECT_NEAR(pearson2d(as_doubles(a), as_doubles(b)), scalar_pearson(as_doubles(a), as_doubles(b)), 1e-10);
  }
}

TEST(Pearson, WorkedTwoByTwo) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3, 5};
  // Frozen: 0.9827076298239908 = 5.5 / sqrt(5 * 6.75)
  EXPECT_NEAR(pearson2d(a, b), 0.9827076298239908, 1e-15);
  EXPECT_NEAR(pearson2d(a, b), scalar_pearson(a, b), 1e-15);
}

TEST(Pearson, SelfAndNegation) {
  std::mt19937_64 rng(3);
  const Frame a = random_frame(9, 8, rng);
  Frame neg = a;
  for (auto& p : neg.pixels) p = static_cast<std::uint8_t>(255 - p);
  EXPECT_NEAR(pearson2d(as_doubles(a), as_doubles(a)), 1.0, 1e-12);
  EXPECT_NEAR(pearson2d(as_doubles(a), as_doubles(neg)), -1.0, 1e-12);
}

TEST(Pearson, ConstantInputs) {
  const std::vector<double> c(16, 5.0), v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  EXPECT_EQ(pearson2d(c, v), 0.0);
  EXPECT_THROW(pearson2d(c, c), DegenerateCorrelationError);
  EXPECT_THROW(pearson2d(v, std::vector<double>(3, 1.0)), InvalidFrameError);
}

TEST(Signal, Identities) {
  EXPECT_NEAR(sonomyography_signal(0.3, 1.0), 0.0, 1e-12);
  EXPECT_NEAR(sonomyography_signal(1.0, 0.3), 1.0, 1e-12);
  EXPECT_NEAR(sonomyography_signal(0.9, 0.9), 0.5, 1e-12);
  EXPECT_THROW(sonomyography_signal(1.0, 1.0), DegenerateSignalError);
}

TEST(Signal, FramesEqualToReferences) {
  std::mt19937_64 rng(11);
  const Frame rest = random_frame(12, 10, rng), motion = random_frame(12, 10, rng);
  const ReferencePair refs(gaussian_smooth(rest), gaussian_smooth(motion));
  EXPECT_NEAR(compute_signal(gaussian_smooth(motion), refs).s_raw, 0.0, 1e-12);
  EXPECT_NEAR(compute_signal(gaussian_smooth(rest), refs).s_raw, 1.0, 1e-12);
}

TEST(Signal, CachedCorrelationsMatchDirectOnes) {
  std::mt19937_64 rng(5);
  const ReferencePair refs(gaussian_smooth(random_frame(10, 9, rng)), gaussian_smooth(random_frame(10, 9, rng)));
  for (int i = 0; i < 20; ++i) {
    const FilteredFrame f = gaussian_smooth(random_frame(10, 9, rng));
    const Correlations c = refs.correlate(f);
    EXPECT_NEAR(c.rest, pearson2d(f, refs.rest()), 1e-12);
    EXPECT_NEAR(c.motion, pearson2d(f, refs.motion()), 1e-12);
  }
}

TEST(Signal, StaysInUnitIntervalForAnyFrame) {
  std::mt19937_64 rng(19);
  const ReferencePair refs(gaussian_smooth(random_frame(8, 8, rng)), gaussian_smooth(random_frame(8, 8, rng)));
  for (int i = 0; i < 500; ++i) {
    const SonomyoSample s = compute_signal(gaussian_smooth(random_frame(8, 8, rng)), refs);
    EXPECT_GE(s.s_raw, 0.0);
    EXPECT_LE(s.s_raw, 1.0);
  }
}

TEST(SignalPipeline, HoldsLastValueOnDegenerateFrame) {
  std::mt19937_64 rng(2);
  // A flat rest reference leaves the correlation undefined for a flat frame.
  const Frame rest = constant_frame(6, 6, 40), motion = random_frame(6, 6, rng);
  SignalPipeline p(ReferencePair(gaussian_smooth(rest), gaussian_smooth(motion)));
  const SonomyoSample first = p.process(motion);
  EXPECT_NEAR(first.s_raw, 0.0, 1e-12);
  const SonomyoSample held = p.process(constant_frame(6, 6, 9, 0.05));
  EXPECT_EQ(held.s_raw, first.s_raw);
  EXPECT_EQ(held.timestamp, 0.05);
  EXPECT_EQ(p.held_count(), 1u);
}

TEST(SignalPipeline, RejectsBadInput) {
  std::mt19937_64 rng(2);
  SignalPipeline p(ReferencePair(gaussian_smooth(random_frame(6, 6, rng)), gaussian_smooth(random_frame(6, 6, rng))));
  Frame f = random_frame(6, 6, rng, 1.0);
  p.process(f);
  EXPECT_THROW(p.process(f), InvalidFrameError);
  EXPECT_THROW(p.process(random_frame(7, 6, rng, 2.0)), InvalidFrameError);
}
