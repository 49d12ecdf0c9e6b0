#pragma once

#include <cstdint>
#include <memory>

#include "sonomyo/calibration.hpp"
#include "sonomyo/config.hpp"
#include "sonomyo/phantom.hpp"
#include "sonomyo/session.hpp"
#include "sonomyo/session_log.hpp"
#include "sonomyo/virtual_subject.hpp"

namespace sonomyo {

// Quarter-resolution phantom for batch simulation: same warp, fewer pixels,
// texture correlation length and shift scaled with the image.
PhantomParams reduced_phantom(std::uint64_t texture_seed = 1);

// Activation a subject produces while following the calibration prompts:
// a one-second ramp into each phase, then the held level (full contraction
// or rest) perturbed by tremor.
class CalibrationBehaviour {
 public:
  CalibrationBehaviour(const CalibrationPlan& plan, const VirtualSubjectParams& params, std::uint64_t seed);
  double operator()(double t);

 private:
  CalibrationPlan plan_;
  double tremor_sigma_;
  double tremor_time_constant_;
  Rng rng_;
  double tremor_ = 0.0;
  double last_t_ = 0.0;
  bool started_ = false;
};

// Calibration of a virtual subject on the phantom. Timestamps run from 0 at
// `rate`; created_at is fixed at 0 so results are reproducible.
TrainingDatabase calibrate_virtual_subject(std::shared_ptr<const Phantom> phantom, const VirtualSubjectParams& params,
                                           const CalibrationPlan& plan, std::uint64_t seed, double rate = 20.0,
                                           double sigma = kDefaultSmoothingSigma);

// What the subject learns in a familiarization block: the cursor position
// each activation level produces (noise-free renders, calibration bounds).
InverseModel familiarize(const Phantom& phantom, const TrainingDatabase& db, const SessionConfig& config,
                         double step = 0.05);

// Frames whose activation comes from a virtual subject that watches the
// cursor. Register it as an observer of the runner that consumes it.
class SubjectFrameSource : public FrameSource, public SessionObserver {
 public:
  SubjectFrameSource(std::shared_ptr<const Phantom> phantom, VirtualSubject& subject, double rate = 20.0,
                     double start = 0.0);

  std::optional<Frame> next() override;
  std::string_view kind() const override { return "synthetic"; }

  void on_presented(std::size_t index, const Target& target, double t) override;
  void on_frame(const FrameRecord& frame) override;

  double last_activation() const { return last_activation_; }

 private:
  std::shared_ptr<const Phantom> phantom_;
  VirtualSubject& subject_;
  double rate_;
  double start_;
  long index_ = 0;
  double last_activation_ = 0.0;
};

// Calibrate, familiarize, then run `plan` with the subject in the loop.
// Everything is derived from `seed`, so equal inputs give equal logs.
SessionLog closed_loop_run(const VirtualSubjectParams& subject, const PhantomParams& phantom, const SessionPlan& plan,
                           const SessionConfig& config, std::uint64_t seed, SessionObserver* extra = nullptr);

}  // namespace sonomyo
