#include "sonomyo/virtual_subject.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sonomyo/error.hpp"
#include "sonomyo/minimum_jerk.hpp"

namespace sonomyo {

SubjectProfile parse_profile(std::string_view name) {
  if (name == "able_bodied") return SubjectProfile::able_bodied;
  if (name == "sci") return SubjectProfile::sci;
  throw ConfigError("unknown subject profile '" + std::string(name) + "'");
}

std::string_view to_string(SubjectProfile p) { return p == SubjectProfile::able_bodied ? "able_bodied" : "sci"; }

VirtualSubjectParams VirtualSubjectParams::able_bodied() { return VirtualSubjectParams{}; }

VirtualSubjectParams VirtualSubjectParams::sci() {
  VirtualSubjectParams p;
  p.profile = SubjectProfile::sci;
  p.reaction_mean = 1.16;
  p.reaction_sd = 0.64;
  p.movement_time_base = 1.3;
  p.movement_time_per_bit = 0.65;
  p.tremor_sigma = 0.03;
  p.tremor_time_constant = 0.15;
  p.submovement_gain = 0.0;
  p.peak_velocity_scale = 1.8;
  p.endpoint_scatter = 0.2;
  p.correction_delay = 0.45;
  p.correction_threshold = 0.8;
  p.correction_precision = 0.4;
  return p;
}

VirtualSubjectParams VirtualSubjectParams::for_profile(SubjectProfile p) {
  return p == SubjectProfile::able_bodied ? able_bodied() : sci();
}

void VirtualSubjectParams::validate() const {
  if (!(reaction_mean > 0.0) || !(movement_time_base > 0.0) || !(movement_time_per_bit > 0.0) ||
      !(tremor_time_constant > 0.0) || !(correction_delay >= 0.0)) {
    throw ConfigError("virtual subject times must be positive");
  }
  if (!(reaction_sd >= 0.0) || !(tremor_sigma >= 0.0) || !(endpoint_scatter >= 0.0) ||
      !(correction_precision >= 0.0)) {
    throw ConfigError("virtual subject spreads must be non-negative");
  }
  if (!(submovement_gain >= 0.0 && submovement_gain < 1.0)) throw ConfigError("submovement_gain must lie in [0, 1)");
  if (!(peak_velocity_scale > 0.0)) throw ConfigError("peak_velocity_scale must be positive");
  if (!(capability >= 0.0 && capability <= 1.0)) throw ConfigError("capability must lie in [0, 1]");
}

double MinJerkSegment::displacement(double t) const {
  return min_jerk_position(0.0, amplitude, (t - start) / duration);
}

double MinJerkSegment::velocity(double t) const {
  return min_jerk_velocity(0.0, amplitude, duration, (t - start) / duration);
}

double MovementPlan::level(double t) const {
  double v = from;
  for (const MinJerkSegment& s : segments) v += s.displacement(t);
  return v;
}

double MovementPlan::end_time() const {
  double end = start_time;
  for (const MinJerkSegment& s : segments) end = std::max(end, s.end());
  return end;
}

double tremor_scale(double level) { return 0.2 + 0.8 * std::clamp(level, 0.0, 1.0); }

double movement_duration(double distance, const VirtualSubjectParams& params) {
  double t = params.movement_time_base;
  if (distance > 0.0) t = std::max(t, t + params.movement_time_per_bit * std::log2(distance / 0.1));
  return t / params.peak_velocity_scale;
}

MovementPlan make_movement_plan(double from, double to, const VirtualSubjectParams& params, Rng& rng,
                                double onset_threshold) {
  MovementPlan plan;
  plan.from = from;
  plan.to = to;
  const double distance = to - from;
  const double direction = distance >= 0.0 ? 1.0 : -1.0;
  plan.primary_duration = movement_duration(std::abs(distance), params);
  plan.reaction_time = params.reaction_sd > 0.0
                           ? rng.lognormal_with_moments(params.reaction_mean, params.reaction_sd)
                           : params.reaction_mean;

  const double nominal_secondary = params.submovement_gain * distance;
  const double scatter = params.endpoint_scatter * std::abs(distance) * rng.normal();
  const double primary = distance - nominal_secondary + scatter;
  plan.segments.push_back({0.0, plan.primary_duration, primary});
  if (params.submovement_gain > 0.0 && distance != 0.0) {
    plan.segments.push_back({0.6 * plan.primary_duration, 0.5 * plan.primary_duration, nominal_secondary});
  }

  // reaction_time is what an observer sees: the moment displacement crosses
  // the onset threshold. Shift the plan so that crossing lands on it.
  double latency = 0.0;
  const auto displaced = [&](double t) {
    double d = 0.0;
    for (const MinJerkSegment& s : plan.segments) d += s.displacement(t);
    return direction * d;
  };
  double end = 0.0;
  for (const MinJerkSegment& s : plan.segments) end = std::max(end, s.end());
  if (displaced(end) >= onset_threshold) {
    double lo = 0.0;
    double hi = end;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (displaced(mid) >= onset_threshold ? hi : lo) = mid;
    }
    latency = hi;
  }
  plan.start_time = std::max(0.0, plan.reaction_time - latency);
  for (MinJerkSegment& s : plan.segments) s.start += plan.start_time;
  return plan;
}

ActivationTrajectory plan_movement(double from, double to, const VirtualSubjectParams& params, std::uint64_t seed,
                                   double rate) {
  params.validate();
  if (!(from >= 0.0 && from <= 1.0 && to >= 0.0 && to <= 1.0)) {
    throw ConfigError("movement endpoints must lie in [0, 1]");
  }
  Rng rng(seed);
  ActivationTrajectory out;
  out.plan = make_movement_plan(from, to, params, rng);
  const double dt = 1.0 / rate;
  const double rho = std::exp(-dt / params.tremor_time_constant);
  const double innovation = params.tremor_sigma * std::sqrt(1.0 - rho * rho);
  double tremor = params.tremor_sigma * rng.normal();
  const auto n = static_cast<long>(std::ceil(out.plan.end_time() * rate));
  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / rate;
    out.t.push_back(t);
    const double level = out.plan.level(t);
    out.activation.push_back(std::clamp(params.capability * (level + tremor_scale(level) * tremor), 0.0, 1.0));
    tremor = rho * tremor + innovation * rng.normal();
  }
  return out;
}

InverseModel::InverseModel(std::vector<double> activations, std::vector<double> positions)
    : activations_(std::move(activations)), positions_(std::move(positions)) {
  if (activations_.size() != positions_.size() || activations_.size() < 2) {
    throw ConfigError("inverse model needs at least two matching points");
  }
  for (std::size_t i = 1; i < positions_.size(); ++i) positions_[i] = std::max(positions_[i], positions_[i - 1]);
}

InverseModel InverseModel::identity() { return InverseModel({0.0, 1.0}, {0.0, 1.0}); }

double InverseModel::activation_for(double position) const {
  if (position <= positions_.front()) return activations_.front();
  if (position >= positions_.back()) return activations_.back();
  const auto it = std::upper_bound(positions_.begin(), positions_.end(), position);
  const std::size_t hi = static_cast<std::size_t>(it - positions_.begin());
  const std::size_t lo = hi - 1;
  const double span = positions_[hi] - positions_[lo];
  if (span <= 0.0) return activations_[lo];
  const double f = (position - positions_[lo]) / span;
  return activations_[lo] + f * (activations_[hi] - activations_[lo]);
}

VirtualSubject::VirtualSubject(VirtualSubjectParams params, std::uint64_t seed, InverseModel model,
                               double onset_threshold)
    : params_(params), rng_(seed), model_(std::move(model)), onset_threshold_(onset_threshold) {
  params_.validate();
  tremor_ = params_.tremor_sigma * rng_.normal();
}

double VirtualSubject::intent(double t) const {
  double v = base_;
  for (const MinJerkSegment& s : segments_) v += s.displacement(t);
  return v;
}

void VirtualSubject::retire_segments(double t) {
  for (auto it = segments_.begin(); it != segments_.end();) {
    if (t >= it->end()) {
      base_ += it->amplitude;
      it = segments_.erase(it);
    } else {
      ++it;
    }
  }
  base_ = std::clamp(base_, -0.1, 1.1);
}

void VirtualSubject::present(const Target& target, double t) {
  retire_segments(t);
  target_ = target;
  // Plan from where the movements already under way will end up.
  double settled = base_;
  for (const MinJerkSegment& s : segments_) settled += s.amplitude;
  const double from = std::clamp(settled, 0.0, 1.0);
  MovementPlan plan = make_movement_plan(from, target.center, params_, rng_, onset_threshold_);
  // Segments carry displacements, so anything already in flight keeps going.
  for (MinJerkSegment s : plan.segments) {
    s.start += t;
    segments_.push_back(s);
  }
  busy_until_ = t + plan.end_time();
  error_since_.reset();
  intent_at_start_ = from;
  perceived_at_start_ = perceived_;
}

void VirtualSubject::observe(const CursorSample& cursor) {
  const double t = cursor.timestamp;
  // Perception smooths the display over roughly 100 ms.
  if (!perceived_ || !last_observed_t_) {
    perceived_ = cursor.position;
  } else {
    const double alpha = 1.0 - std::exp(-(t - *last_observed_t_) / 0.1);
    *perceived_ += alpha * (cursor.position - *perceived_);
  }
  last_observed_t_ = t;
  if (!target_ || t < busy_until_) return;

  if (intent_at_start_ && perceived_at_start_) {
    double settled = base_;
    for (const MinJerkSegment& s : segments_) settled += s.amplitude;
    const double intended = settled - *intent_at_start_;
    if (std::abs(intended) >= 0.05) gain_ = std::clamp((*perceived_ - *perceived_at_start_) / intended, 0.25, 4.0);
  }
  intent_at_start_.reset();
  perceived_at_start_.reset();

  const double error = target_->center - *perceived_;
  if (std::abs(error) <= params_.correction_threshold * target_->half_width) {
    error_since_.reset();
    return;
  }
  if (!error_since_) {
    error_since_ = t;
    return;
  }
  if (t - *error_since_ < params_.correction_delay) return;

  retire_segments(t);
  double settled = base_;
  for (const MinJerkSegment& s : segments_) settled += s.amplitude;
  const double amplitude = error / gain_ * (1.0 + params_.correction_precision * rng_.normal());
  const double duration = movement_duration(std::abs(amplitude), params_);
  segments_.push_back({t, duration, amplitude});
  busy_until_ = t + duration;
  error_since_.reset();
  intent_at_start_ = settled;
  perceived_at_start_ = perceived_;
}

double VirtualSubject::activation(double t) {
  if (last_t_) {
    const double dt = std::max(0.0, t - *last_t_);
    const double rho = std::exp(-dt / params_.tremor_time_constant);
    tremor_ = rho * tremor_ + params_.tremor_sigma * std::sqrt(1.0 - rho * rho) * rng_.normal();
  }
  last_t_ = t;
  retire_segments(t);
  const double planned = intent(t);
  const double desired = planned + tremor_scale(planned) * tremor_;
  return std::clamp(params_.capability * model_.activation_for(desired), 0.0, 1.0);
}

}  // namespace sonomyo
