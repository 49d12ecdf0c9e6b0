#include "sonomyo/task_engine.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sonomyo/error.hpp"

namespace sonomyo {

void TaskConfig::validate() const {
  if (levels < 1) throw ConfigError("task needs at least one target level");
  if (!(half_width > 0.0)) throw ConfigError("target half width must be positive");
  if (!(dwell_required > 0.0)) throw ConfigError("dwell time must be positive");
  if (!(trial_timeout > 0.0)) throw ConfigError("trial timeout must be positive");
  if (!(onset_threshold > 0.0)) throw ConfigError("onset threshold must be positive");
  const double top = level_step * levels;
  if (level_step - half_width < 0.0 || top + half_width > 1.0 + 1e-12) {
    throw ConfigError("target bands must lie inside [0, 1]");
  }
}

SessionPlan build_session_plan(std::uint64_t seed, const TaskConfig& config) {
  config.validate();
  std::vector<Target> levels;
  levels.reserve(static_cast<std::size_t>(config.levels));
  for (int k = 1; k <= config.levels; ++k) levels.push_back({k * config.level_step, config.half_width});

  // Fisher-Yates on raw engine output keeps plans identical across standard
  // library implementations (std::shuffle's draw sequence is unspecified).
  std::mt19937_64 rng(seed);
  for (std::size_t i = levels.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(levels[i - 1], levels[j]);
  }

  SessionPlan plan;
  plan.dwell_required = config.dwell_required;
  plan.trial_timeout = config.trial_timeout;
  plan.rng_seed = seed;
  for (const Target& t : levels) {
    plan.targets.push_back(t);
    plan.targets.push_back({0.0, config.half_width});
  }
  return plan;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::presented: return "presented";
    case EventKind::movement_onset: return "movement_onset";
    case EventKind::band_entry: return "band_entry";
    case EventKind::band_exit: return "band_exit";
    case EventKind::success: return "success";
    case EventKind::timeout: return "timeout";
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view name) {
  for (EventKind k : {EventKind::presented, EventKind::movement_onset, EventKind::band_entry, EventKind::band_exit,
                      EventKind::success, EventKind::timeout}) {
    if (to_string(k) == name) return k;
  }
  throw ProtocolError("unknown trial event kind '" + std::string(name) + "'");
}

std::optional<TrialEvent> TrialRecord::first(EventKind kind) const {
  for (const TrialEvent& e : events)
    if (e.kind == kind) return e;
  return std::nullopt;
}

std::optional<TrialEvent> TrialRecord::terminal() const {
  for (const TrialEvent& e : events)
    if (e.is_terminal()) return e;
  return std::nullopt;
}

double TrialRecord::presented_at() const {
  if (auto p = first(EventKind::presented)) return p->timestamp;
  return samples.empty() ? 0.0 : samples.front().timestamp;
}

TrialMachine::TrialMachine(Target target, double dwell_required, double trial_timeout, double onset_threshold)
    : target_(target),
      dwell_required_(dwell_required),
      trial_timeout_(trial_timeout),
      onset_threshold_(onset_threshold) {}

std::vector<TrialEvent> TrialMachine::step(const CursorSample& sample) {
  if (finished_) throw ProtocolError("trial already finished");
  std::vector<TrialEvent> events;
  const double t = sample.timestamp;

  if (!presented_at_) {
    presented_at_ = t;
    start_position_ = sample.position;
    events.push_back({EventKind::presented, t});
  } else {
    if (!(t > last_timestamp_)) {
      throw ProtocolError("cursor samples out of order: " + std::to_string(t) + " after " +
                          std::to_string(last_timestamp_));
    }
    // Resolve what the held state implies up to this sample's arrival.
    const double deadline = *presented_at_ + trial_timeout_;
    if (in_band_) {
      const double done = run_start_ + dwell_required_;
      if (done <= t && done <= deadline) {
        events.push_back({EventKind::success, done});
        finished_ = true;
        succeeded_ = true;
      }
    }
    if (!finished_ && t >= deadline) {
      events.push_back({EventKind::timeout, deadline});
      finished_ = true;
    }
    if (finished_) {
      last_timestamp_ = t;
      return events;
    }
  }
  last_timestamp_ = t;

  if (!onset_seen_) {
    // Displacement is measured toward the target: upward for regular
    // targets, downward for the reset target below the start.
    const double displacement =
        target_.center >= start_position_ ? sample.position - start_position_ : start_position_ - sample.position;
    if (displacement >= onset_threshold_) {
      onset_seen_ = true;
      events.push_back({EventKind::movement_onset, t});
    }
  }

  const bool inside = target_.contains(sample.position);
  if (inside && !in_band_) {
    in_band_ = true;
    run_start_ = t;
    events.push_back({EventKind::band_entry, t});
  } else if (!inside && in_band_) {
    in_band_ = false;
    events.push_back({EventKind::band_exit, t});
  }
  return events;
}

TrialRecord run_trial(const CursorSampleSource& source, const Target& target, const TaskConfig& config) {
  TrialMachine machine(target, config.dwell_required, config.trial_timeout, config.onset_threshold);
  TrialRecord record;
  record.target = target;
  while (!machine.finished()) {
    std::optional<CursorSample> sample = source();
    if (!sample) {
      record.aborted = true;
      record.succeeded = false;
      return record;
    }
    record.samples.push_back(*sample);
    for (const TrialEvent& e : machine.step(*sample)) record.events.push_back(e);
  }
  record.succeeded = machine.succeeded();
  return record;
}

TrialSequencer::TrialSequencer(SessionPlan plan, double onset_threshold)
    : plan_(std::move(plan)), onset_threshold_(onset_threshold) {}

TrialSequencer::Step TrialSequencer::step(const CursorSample& sample) {
  if (!current_) {
    if (next_ >= plan_.targets.size()) throw ProtocolError("session plan exhausted");
    const Target& target = plan_.targets[next_++];
    machine_.emplace(target, plan_.dwell_required, plan_.trial_timeout, onset_threshold_);
    current_.emplace();
    current_->target = target;
  }
  Step out;
  out.trial = next_ - 1;
  current_->samples.push_back(sample);
  out.events = machine_->step(sample);
  current_->events.insert(current_->events.end(), out.events.begin(), out.events.end());
  if (machine_->finished()) {
    current_->succeeded = machine_->succeeded();
    completed_.push_back(*current_);
    out.completed = std::move(*current_);
    current_.reset();
    machine_.reset();
  }
  return out;
}

std::optional<TrialRecord> TrialSequencer::abort() {
  if (!current_) return std::nullopt;
  current_->aborted = true;
  current_->succeeded = false;
  completed_.push_back(*current_);
  std::optional<TrialRecord> out = std::move(current_);
  current_.reset();
  machine_.reset();
  return out;
}

std::vector<TrialRecord> run_plan(std::span<const CursorSample> samples, const SessionPlan& plan,
                                  double onset_threshold) {
  TrialSequencer seq(plan, onset_threshold);
  for (const CursorSample& s : samples) {
    if (seq.done()) break;
    seq.step(s);
  }
  seq.abort();
  return seq.completed();
}

}  // namespace sonomyo
