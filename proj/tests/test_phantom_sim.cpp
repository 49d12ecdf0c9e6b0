#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "sonomyo/error.hpp"
#include "sonomyo/frame_pipeline.hpp"
#include "sonomyo/metrics.hpp"
#include "sonomyo/minimum_jerk.hpp"
#include "sonomyo/phantom.hpp"
#include "sonomyo/session.hpp"
#include "sonomyo/simulation.hpp"
#include "sonomyo/virtual_subject.hpp"

using namespace sonomyo;

namespace {

PhantomParams quiet(PhantomParams p) {
  p.noise_sigma = 0.0;
  return p;
}

double corr(const Frame& a, const Frame& b) { return pearson2d(gaussian_smooth(a), gaussian_smooth(b)); }

SessionPlan short_plan(std::uint64_t seed, std::size_t targets) {
  SessionPlan plan = build_session_plan(seed, TaskConfig{});
  plan.targets.resize(targets);
  return plan;
}

}  // namespace

TEST(Phantom, ZeroActivationIsTheBaseTexture) {
  const Phantom ph(quiet(PhantomParams{}));
  const Frame base = ph.base_frame();
  EXPECT_EQ(base.width, 363);
  EXPECT_EQ(base.height, 660);
  EXPECT_EQ(ph.render(0.0, 3.0).pixels, base.pixels);
  EXPECT_NEAR(corr(base, base), 1.0, 1e-12);
}

TEST(Phantom, FullContractionDecorrelates) {
  const Phantom ph(quiet(PhantomParams{}));
  EXPECT_LT(corr(ph.render(1.0, 0.0), ph.base_frame()), 0.9);
  const Phantom small(quiet(reduced_phantom()));
  EXPECT_LT(corr(small.render(1.0, 0.0), small.base_frame()), 0.9);
}

TEST(Phantom, CorrelationFallsMonotonicallyWithActivation) {
  for (const PhantomParams& p : {quiet(PhantomParams{}), quiet(reduced_phantom(4))}) {
    const Phantom ph(p);
    const Frame base = ph.base_frame();
    double prev = 2.0;
    for (int i = 0; i <= 10; ++i) {
      const double c = corr(ph.render(i / 10.0, 0.0), base);
      EXPECT_LT(c, prev) << "activation " << i / 10.0;
      prev = c;
    }
  }
}

TEST(Phantom, DeterministicNoise) {
  const Phantom ph(reduced_phantom());
  EXPECT_EQ(ph.render(0.3, 1.25), ph.render(0.3, 1.25));
  EXPECT_NE(ph.render(0.3, 1.25).pixels, ph.render(0.3, 1.30).pixels);
  EXPECT_EQ(ph.render(0.3, 1.25).pixels, Phantom(reduced_phantom()).render(0.3, 1.25).pixels);
  EXPECT_NE(Phantom(reduced_phantom(2)).base_frame().pixels, ph.base_frame().pixels);
}

TEST(Phantom, NoiseHasTheConfiguredSpread) {
  PhantomParams p = reduced_phantom();
  p.mean_intensity = 128.0;
  p.contrast = 20.0;
  const Phantom ph(p);
  const Frame clean = ph.render_noise_free(0.5);
  const Frame noisy = ph.render(0.5, 2.0);
  double sum = 0, ss = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < clean.pixels.size(); ++i) {
    if (clean.pixels[i] < 10 || clean.pixels[i] > 245) continue;
    const double d = double(noisy.pixels[i]) - double(clean.pixels[i]);
    sum += d;
    ss += d * d;
    ++n;
  }
  const double mean = sum / n;
  // Rounding both images adds about 1/6 to the variance.
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_NEAR(std::sqrt(ss / n - mean * mean), std::sqrt(4.0 + 1.0 / 6.0), 0.1);
}

TEST(Phantom, Validation) {
  const Phantom ph(reduced_phantom());
  EXPECT_THROW(ph.render(1.01, 0.0), ConfigError);
  EXPECT_THROW(ph.render(-0.01, 0.0), ConfigError);
  PhantomParams p;
  p.max_shift = 165.0;
  EXPECT_THROW(Phantom{p}, ConfigError);
  p = {};
  p.noise_sigma = -1.0;
  EXPECT_THROW(Phantom{p}, ConfigError);
}

TEST(PlanMovement, NoiseFreeIsMinimumJerk) {
  VirtualSubjectParams p;
  p.reaction_sd = 0.0;
  p.tremor_sigma = 0.0;
  p.submovement_gain = 0.0;
  p.endpoint_scatter = 0.0;
  const ActivationTrajectory tr = plan_movement(0.0, 0.5, p, 7, 200.0);
  const double T = tr.plan.primary_duration;
  EXPECT_DOUBLE_EQ(T, movement_duration(0.5, p));
  EXPECT_NEAR(T, 1.2 + 0.6 * std::log2(5.0), 1e-12);
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    EXPECT_NEAR(tr.activation[i], min_jerk_position(0.0, 0.5, (tr.t[i] - tr.plan.start_time) / T), 1e-12);
  }
  EXPECT_NEAR(tr.plan.level(tr.plan.start_time + 0.5 * T), 0.25, 1e-12);
  EXPECT_NEAR(tr.plan.level(tr.plan.start_time), 0.0, 1e-12);
  EXPECT_NEAR(tr.plan.level(tr.plan.start_time + T), 0.5, 1e-12);
  EXPECT_NEAR(tr.plan.segments[0].velocity(tr.plan.start_time + 1e-9), 0.0, 1e-9);
  EXPECT_NEAR(tr.plan.segments[0].velocity(tr.plan.start_time + T - 1e-9), 0.0, 1e-9);
  // Observable onset (5 % displacement) lands on the sampled reaction time.
  EXPECT_NEAR(tr.plan.level(tr.plan.reaction_time), 0.05, 1e-9);
  EXPECT_NEAR(tr.plan.reaction_time, 0.84, 1e-12);
}

TEST(PlanMovement, DurationModel) {
  VirtualSubjectParams p;
  EXPECT_DOUBLE_EQ(movement_duration(0.05, p), 1.2);
  EXPECT_DOUBLE_EQ(movement_duration(0.4, p), 1.2 + 0.6 * 2.0);
  const VirtualSubjectParams sci = VirtualSubjectParams::sci();
  EXPECT_DOUBLE_EQ(movement_duration(0.4, sci), (1.3 + 0.65 * 2.0) / 1.8);
  EXPECT_THROW(plan_movement(0.0, 1.2, p, 1), ConfigError);
}

TEST(PlanMovement, AbleBodiedTrajectoriesFitMinimumJerk) {
  const VirtualSubjectParams p = VirtualSubjectParams::able_bodied();
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const double to = 0.1 * static_cast<double>(1 + seed % 9);
    const ActivationTrajectory tr = plan_movement(0.0, to, p, seed);
    std::vector<double> obs, t;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      if (tr.t[i] < tr.plan.start_time) continue;
      obs.push_back(tr.activation[i]);
      t.push_back(tr.t[i] - tr.plan.start_time);
    }
    const auto ref = min_jerk_reference(0.0, to, tr.plan.end_time() - tr.plan.start_time, t);
    sum += r_squared(obs, ref).value();
    ++n;
  }
  EXPECT_GE(sum / n, 0.85);
}

TEST(VirtualSubject, SciPresetDirections) {
  const auto ab = VirtualSubjectParams::able_bodied(), sci = VirtualSubjectParams::sci();
  EXPECT_GT(sci.reaction_mean, ab.reaction_mean);
  EXPECT_DOUBLE_EQ(sci.reaction_mean, 1.16);
  EXPECT_DOUBLE_EQ(ab.reaction_mean, 0.84);
  EXPECT_GT(sci.tremor_sigma, ab.tremor_sigma);
  EXPECT_GT(sci.peak_velocity_scale, ab.peak_velocity_scale);
  EXPECT_EQ(parse_profile("sci"), SubjectProfile::sci);
  EXPECT_THROW(parse_profile("robot"), ConfigError);
}

TEST(VirtualSubject, InverseModelInterpolates) {
  const InverseModel m({0.0, 0.5, 1.0}, {0.0, 0.8, 1.0});
  EXPECT_DOUBLE_EQ(m.activation_for(0.4), 0.25);
  EXPECT_DOUBLE_EQ(m.activation_for(0.9), 0.75);
  EXPECT_DOUBLE_EQ(m.activation_for(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(m.activation_for(2.0), 1.0);
  EXPECT_DOUBLE_EQ(InverseModel::identity().activation_for(0.3), 0.3);
}

TEST(VirtualSubject, MovesTowardPresentedTarget) {
  VirtualSubjectParams p;
  p.tremor_sigma = 0.0;
  VirtualSubject s(p, 3, InverseModel::identity());
  EXPECT_DOUBLE_EQ(s.activation(0.0), 0.0);
  s.present({0.6, 0.05}, 0.0);
  double a = 0.0;
  for (int k = 1; k <= 100; ++k) {
    a = s.activation(k / 20.0);
    s.observe({a, 1 - a, k / 20.0});
  }
  EXPECT_NEAR(a, 0.6, 0.05);
}

TEST(ClosedLoop, FullLoopMonotoneWithFrozenBounds) {
  const auto ph = std::make_shared<const Phantom>(reduced_phantom());
  // References at exactly rest and full contraction. Noisy calibration
  // frames sit a little inside the range, and the curve folds back there.
  const TrainingDatabase db =
      TrainingDatabase::from_frames(ph->render_noise_free(0.0), ph->render_noise_free(1.0), 1, 1, 0.0);
  SessionConfig cfg;
  cfg.bounds.frozen = true;
  SessionPlan plan;
  plan.targets.assign(1, Target{0.5, 0.05});
  plan.trial_timeout = 1000.0;
  SessionRunner runner(db, cfg, plan);
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const FrameRecord r = runner.process(ph->render_noise_free(i / 100.0, i * 0.05));
    EXPECT_GE(r.position, prev - 1e-12) << i;
    prev = r.position;
  }
  EXPECT_DOUBLE_EQ(prev, 1.0);
}

TEST(ClosedLoop, AbleBodiedHitsTargets) {
  SessionConfig cfg;
  const SessionLog log = closed_loop_run(VirtualSubjectParams::able_bodied(), reduced_phantom(), build_session_plan(1, cfg.task), cfg, 1);
  ASSERT_EQ(log.trials.size(), 18u);
  EXPECT_GE(success_rate(log.trials), 100.0 * 8.0 / 9.0);
  EXPECT_EQ(log.metadata.at("group"), "able_bodied");
  EXPECT_TRUE(log.references.has_value());
}

TEST(ClosedLoop, ZeroCapabilityNeverSucceeds) {
  VirtualSubjectParams p;
  p.capability = 0.0;
  SessionConfig cfg;
  const SessionLog log = closed_loop_run(p, reduced_phantom(), short_plan(2, 6), cfg, 2);
  ASSERT_EQ(log.trials.size(), 6u);
  EXPECT_DOUBLE_EQ(success_rate(log.trials), 0.0);
  for (const TrialRecord& t : log.trials) {
    if (t.target.is_reset()) continue;
    EXPECT_TRUE(t.first(EventKind::timeout).has_value());
    EXPECT_FALSE(t.first(EventKind::movement_onset).has_value());
  }
}

TEST(ClosedLoop, SeedDeterminism) {
  SessionConfig cfg;
  const auto plan = short_plan(5, 4);
  const SessionLog a = closed_loop_run(VirtualSubjectParams::sci(), reduced_phantom(), plan, cfg, 5);
  const SessionLog b = closed_loop_run(VirtualSubjectParams::sci(), reduced_phantom(), plan, cfg, 5);
  EXPECT_EQ(a, b);
  const SessionLog c = closed_loop_run(VirtualSubjectParams::sci(), reduced_phantom(), plan, cfg, 6);
  EXPECT_NE(a.frames, c.frames);
}

TEST(ClosedLoop, SessionStartsAfterCalibration) {
  SessionConfig cfg;
  const SessionLog log = closed_loop_run(VirtualSubjectParams{}, reduced_phantom(), short_plan(1, 2), cfg, 1);
  ASSERT_FALSE(log.frames.empty());
  EXPECT_DOUBLE_EQ(log.frames.front().timestamp, 60.0);
}
