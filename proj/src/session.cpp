#include "sonomyo/session.hpp"

#include <algorithm>

namespace sonomyo {

Bounds initial_bounds(const ReferencePair& refs) {
  const double a = compute_signal(refs.rest(), refs).s_raw;
  const double b = compute_signal(refs.motion(), refs).s_raw;
  return {std::min(a, b), std::max(a, b)};
}

SessionRunner::SessionRunner(const TrainingDatabase& db, const SessionConfig& config, SessionPlan plan)
    : pipeline_(db.refs, config.pipeline.sigma),
      tracker_(initial_bounds(db.refs), config.bounds),
      orientation_(config.pipeline.orientation),
      sequencer_(std::move(plan), config.task.onset_threshold) {}

FrameRecord SessionRunner::process(const Frame& frame) {
  if (sequencer_.done()) throw ProtocolError("session plan already complete");
  const SonomyoSample s = pipeline_.process(frame);
  const Bounds& b = tracker_.update(s.s_raw);
  const double s_norm = normalize(s.s_raw, b);
  const CursorSample cursor = map_to_cursor(s_norm, orientation_, s.timestamp);

  TrialSequencer::Step step = sequencer_.step(cursor);
  FrameRecord record{s.timestamp, s.s_raw, s.c_rest, s.c_motion, b, s_norm, cursor.position, step.trial};

  auto ev = step.events.begin();
  if (ev != step.events.end() && ev->kind == EventKind::presented) {
    for (SessionObserver* o : observers_) o->on_presented(step.trial, sequencer_.plan().targets[step.trial], ev->timestamp);
  }
  for (SessionObserver* o : observers_) o->on_frame(record);
  for (const TrialEvent& e : step.events)
    for (SessionObserver* o : observers_) o->on_event(step.trial, e);
  if (step.completed)
    for (SessionObserver* o : observers_) o->on_trial(step.trial, *step.completed);
  return record;
}

void SessionRunner::run(FrameSource& source, const std::atomic<bool>* stop) {
  while (!sequencer_.done()) {
    if (stop && stop->load()) break;
    std::optional<Frame> frame = source.next();
    if (!frame) break;
    process(*frame);
  }
  abort();
}

std::optional<TrialRecord> SessionRunner::abort() {
  const std::size_t index = sequencer_.current_index();
  std::optional<TrialRecord> trial = sequencer_.abort();
  if (trial)
    for (SessionObserver* o : observers_) o->on_trial(index, *trial);
  return trial;
}

}  // namespace sonomyo
