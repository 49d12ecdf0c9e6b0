#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sonomyo/normalization.hpp"

namespace sonomyo {

struct Target {
  double center = 0.0;
  double half_width = 0.05;

  double low() const { return center - half_width; }
  double high() const { return center + half_width; }
  bool contains(double position) const { return position >= low() && position <= high(); }
  bool is_reset() const { return center == 0.0; }

  bool operator==(const Target&) const = default;
};

struct TaskConfig {
  int levels = 9;                 // nonzero targets at 1/(levels+1) steps
  double level_step = 0.10;
  double half_width = 0.05;
  double dwell_required = 1.5;    // seconds, continuous in-band
  double trial_timeout = 10.0;    // seconds from presentation
  double onset_threshold = 0.05;  // displacement from the trial's first sample
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TaskConfig&) const = default;
};

struct SessionPlan {
  std::vector<Target> targets;  // trial, reset, trial, reset, ...
  double dwell_required = 1.5;
  double trial_timeout = 10.0;
  std::uint64_t rng_seed = 0;

  bool operator==(const SessionPlan&) const = default;
};

// Nine levels shuffled under `seed`, each followed by a reset target at 0.
SessionPlan build_session_plan(std::uint64_t seed, const TaskConfig& config);

enum class EventKind { presented, movement_onset, band_entry, band_exit, success, timeout };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view name);

struct TrialEvent {
  EventKind kind = EventKind::presented;
  double timestamp = 0.0;

  bool is_terminal() const { return kind == EventKind::success || kind == EventKind::timeout; }
  bool operator==(const TrialEvent&) const = default;
};

struct TrialRecord {
  Target target;
  std::vector<CursorSample> samples;
  std::vector<TrialEvent> events;
  bool succeeded = false;
  bool aborted = false;

  std::optional<TrialEvent> first(EventKind kind) const;
  std::optional<TrialEvent> terminal() const;
  double presented_at() const;

  bool operator==(const TrialRecord&) const = default;
};

// Per-trial state machine. In-band status is evaluated per sample and held
// until the next one, so time spent between samples counts toward the
// dwell. Success and timeout are reported at their exact deadline even when
// the sample that reveals them arrives later.
class TrialMachine {
 public:
  TrialMachine(Target target, double dwell_required, double trial_timeout, double onset_threshold = 0.05);

  // Feeds one sample and returns the events it triggers. The first sample
  // presents the trial. Throws ProtocolError on non-increasing timestamps or
  // when called after the terminal event.
  std::vector<TrialEvent> step(const CursorSample& sample);

  bool finished() const { return finished_; }
  bool succeeded() const { return succeeded_; }
  bool in_band() const { return in_band_; }
  const Target& target() const { return target_; }
  std::optional<double> presented_at() const { return presented_at_; }
  // Start of the in-band run currently being held, if any.
  std::optional<double> run_start() const { return in_band_ ? std::optional<double>(run_start_) : std::nullopt; }

 private:
  Target target_;
  double dwell_required_;
  double trial_timeout_;
  double onset_threshold_;

  std::optional<double> presented_at_;
  double start_position_ = 0.0;
  double last_timestamp_ = 0.0;
  bool onset_seen_ = false;
  bool in_band_ = false;
  double run_start_ = 0.0;
  bool finished_ = false;
  bool succeeded_ = false;
};

// Runs the targets of a plan back to back over one cursor stream. The
// sample that ends a trial is the last sample of that trial; the next
// sample presents the following target.
class TrialSequencer {
 public:
  explicit TrialSequencer(SessionPlan plan, double onset_threshold = 0.05);

  struct Step {
    std::size_t trial = 0;
    std::vector<TrialEvent> events;
    std::optional<TrialRecord> completed;
  };

  // Throws ProtocolError once every target has been run.
  Step step(const CursorSample& sample);

  // Closes the trial in progress, if any, as aborted.
  std::optional<TrialRecord> abort();

  bool done() const { return next_ >= plan_.targets.size() && !current_; }
  std::size_t current_index() const { return next_ - (current_ ? 1 : 0); }
  const SessionPlan& plan() const { return plan_; }
  const std::vector<TrialRecord>& completed() const { return completed_; }

 private:
  SessionPlan plan_;
  double onset_threshold_;
  std::size_t next_ = 0;
  std::optional<TrialMachine> machine_;
  std::optional<TrialRecord> current_;
  std::vector<TrialRecord> completed_;
};

// Full trial timeline of a cursor stream under `plan`; a trial cut short by
// the end of the stream is reported as aborted.
std::vector<TrialRecord> run_plan(std::span<const CursorSample> samples, const SessionPlan& plan,
                                  double onset_threshold = 0.05);

// Pulls the next sample; std::nullopt means the stream has ended.
using CursorSampleSource = std::function<std::optional<CursorSample>()>;

// Drives a TrialMachine over `source` until a terminal event. A stream that
// ends first yields a record with aborted = true and succeeded = false.
TrialRecord run_trial(const CursorSampleSource& source, const Target& target, const TaskConfig& config);

}  // namespace sonomyo
