#include "sonomyo/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "sonomyo/minimum_jerk.hpp"

namespace sonomyo {

PhantomParams reduced_phantom(std::uint64_t texture_seed) {
  PhantomParams p;
  p.width = 91;
  p.height = 165;
  p.max_shift = 10.0;
  p.correlation_length = 10.0;
  p.texture_seed = texture_seed;
  return p;
}

CalibrationBehaviour::CalibrationBehaviour(const CalibrationPlan& plan, const VirtualSubjectParams& params,
                                           std::uint64_t seed)
    : plan_(plan),
      tremor_sigma_(params.tremor_sigma),
      tremor_time_constant_(params.tremor_time_constant),
      rng_(seed) {}

double CalibrationBehaviour::operator()(double t) {
  if (!started_) {
    tremor_ = tremor_sigma_ * rng_.normal();
    started_ = true;
  } else {
    const double rho = std::exp(-std::max(0.0, t - last_t_) / tremor_time_constant_);
    tremor_ = rho * tremor_ + tremor_sigma_ * std::sqrt(1.0 - rho * rho) * rng_.normal();
  }
  last_t_ = t;

  // Level held in the phase active at t, and the level before it.
  double level = 0.0;
  double previous = 0.0;
  double since = t;
  double latest_start = -1.0;
  for (const PromptEntry& p : plan_.prompt_schedule) {
    if (p.start <= t && p.start > latest_start) {
      latest_start = p.start;
      previous = level;
      level = p.label == kFlexPhase ? 1.0 : 0.0;
      since = t - p.start;
    }
  }
  const double ramp = min_jerk_position(previous, level, since / 1.0);
  const double a = level > 0.5 ? ramp - std::abs(tremor_) : ramp + std::abs(tremor_);
  return std::clamp(a, 0.0, 1.0);
}

TrainingDatabase calibrate_virtual_subject(std::shared_ptr<const Phantom> phantom, const VirtualSubjectParams& params,
                                           const CalibrationPlan& plan, std::uint64_t seed, double rate,
                                           double sigma) {
  auto behaviour = std::make_shared<CalibrationBehaviour>(plan, params, seed);
  SyntheticFrameSource source(std::move(phantom), [behaviour](double t) { return (*behaviour)(t); }, rate, 0.0,
                              plan.end());
  return run_calibration(source, plan, sigma, 0.0);
}

InverseModel familiarize(const Phantom& phantom, const TrainingDatabase& db, const SessionConfig& config, double step) {
  const Bounds bounds = initial_bounds(db.refs);
  std::vector<double> acts;
  std::vector<double> positions;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    const double a = std::min(1.0, i * step);
    const FilteredFrame f = gaussian_smooth(phantom.render_noise_free(a), config.pipeline.sigma);
    const double s = compute_signal(f, db.refs).s_raw;
    acts.push_back(a);
    positions.push_back(map_to_cursor(normalize(s, bounds), config.pipeline.orientation).position);
  }
  return InverseModel(std::move(acts), std::move(positions));
}

SubjectFrameSource::SubjectFrameSource(std::shared_ptr<const Phantom> phantom, VirtualSubject& subject, double rate,
                                       double start)
    : phantom_(std::move(phantom)), subject_(subject), rate_(rate), start_(start) {}

std::optional<Frame> SubjectFrameSource::next() {
  const double t = start_ + static_cast<double>(index_++) / rate_;
  last_activation_ = subject_.activation(t);
  return phantom_->render(last_activation_, t);
}

void SubjectFrameSource::on_presented(std::size_t, const Target& target, double t) { subject_.present(target, t); }

void SubjectFrameSource::on_frame(const FrameRecord& frame) { subject_.observe(frame.cursor()); }

SessionLog closed_loop_run(const VirtualSubjectParams& subject_params, const PhantomParams& phantom_params,
                           const SessionPlan& plan, const SessionConfig& config, std::uint64_t seed,
                           SessionObserver* extra) {
  subject_params.validate();
  auto phantom = std::make_shared<const Phantom>(phantom_params);
  const double rate = config.source.rate;

  const TrainingDatabase db = calibrate_virtual_subject(phantom, subject_params, config.calibration,
                                                        splitmix64(seed ^ 0xca11b8a7e0000000ULL), rate,
                                                        config.pipeline.sigma);
  VirtualSubject subject(subject_params, splitmix64(seed), familiarize(*phantom, db, config),
                         config.task.onset_threshold);

  SessionLog log;
  log.config = config;
  log.config.source.kind = "synthetic";
  log.config.source.phantom = phantom_params;
  log.config.source.profile = subject_params.profile;
  log.config.source.subject_seed = seed;
  log.plan = plan;
  log.metadata = {{"group", std::string(to_string(subject_params.profile))},
                  {"seed", seed},
                  {"subject", subject_params}};
  log.references = ReferenceSet::from(db);

  // Session time starts after calibration, as it would at the bench.
  const double start = std::ceil(config.calibration.end() * rate) / rate;
  SubjectFrameSource source(phantom, subject, rate, start);
  SessionRunner runner(db, log.config, plan);
  LogCollector collector(log);
  runner.add_observer(&source);
  runner.add_observer(&collector);
  if (extra) runner.add_observer(extra);
  runner.run(source);
  log.complete = true;
  return log;
}

}  // namespace sonomyo
