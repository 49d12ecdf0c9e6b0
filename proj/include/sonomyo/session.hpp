#pragma once

#include <atomic>
#include <optional>
#include <vector>

#include "sonomyo/calibration.hpp"
#include "sonomyo/config.hpp"
#include "sonomyo/frame_pipeline.hpp"
#include "sonomyo/frame_source.hpp"
#include "sonomyo/normalization.hpp"
#include "sonomyo/session_log.hpp"
#include "sonomyo/task_engine.hpp"

namespace sonomyo {

// Callbacks from the processing lane. For each frame the order is:
// on_presented (when the frame opens a trial), on_frame, on_event for each
// trial event, then on_trial when the frame closes the trial.
class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void on_presented(std::size_t /*index*/, const Target& /*target*/, double /*t*/) {}
  virtual void on_frame(const FrameRecord& /*frame*/) {}
  virtual void on_event(std::size_t /*index*/, const TrialEvent& /*event*/) {}
  virtual void on_trial(std::size_t /*index*/, const TrialRecord& /*trial*/) {}
};

// Collects everything into an in-memory SessionLog.
class LogCollector : public SessionObserver {
 public:
  explicit LogCollector(SessionLog& log) : log_(log) {}
  void on_frame(const FrameRecord& frame) override { log_.frames.push_back(frame); }
  void on_trial(std::size_t, const TrialRecord& trial) override { log_.trials.push_back(trial); }

 private:
  SessionLog& log_;
};

// Streams records straight to disk.
class LogWriterObserver : public SessionObserver {
 public:
  explicit LogWriterObserver(SessionLogWriter& writer) : writer_(writer) {}
  void on_frame(const FrameRecord& frame) override { writer_.write_frame(frame); }
  void on_trial(std::size_t index, const TrialRecord& trial) override { writer_.write_trial(index, trial); }

 private:
  SessionLogWriter& writer_;
};

// Bounds at the start of a session: the signal values of the two
// references themselves, so the calibrated range maps onto [0, 1].
Bounds initial_bounds(const ReferencePair& refs);

// frame -> signal -> bounds -> cursor -> trial state, one frame at a time.
class SessionRunner {
 public:
  SessionRunner(const TrainingDatabase& db, const SessionConfig& config, SessionPlan plan);

  void add_observer(SessionObserver* observer) { observers_.push_back(observer); }

  // Throws ProtocolError once the plan is done.
  FrameRecord process(const Frame& frame);

  // Pulls frames until the plan is done, the source runs dry, or `stop`
  // becomes true. A trial left open is closed as aborted.
  void run(FrameSource& source, const std::atomic<bool>* stop = nullptr);

  // Closes the open trial, if any, as aborted and reports it.
  std::optional<TrialRecord> abort();

  bool done() const { return sequencer_.done(); }
  const Bounds& bounds() const { return tracker_.bounds(); }
  const std::vector<TrialRecord>& trials() const { return sequencer_.completed(); }
  const SessionPlan& plan() const { return sequencer_.plan(); }
  std::size_t held_frames() const { return pipeline_.held_count(); }

 private:
  SignalPipeline pipeline_;
  BoundTracker tracker_;
  Orientation orientation_;
  TrialSequencer sequencer_;
  std::vector<SessionObserver*> observers_;
};

}  // namespace sonomyo
