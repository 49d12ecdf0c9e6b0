#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sonomyo/normalization.hpp"
#include "sonomyo/random.hpp"
#include "sonomyo/task_engine.hpp"

namespace sonomyo {

enum class SubjectProfile { able_bodied, sci };

SubjectProfile parse_profile(std::string_view name);
std::string_view to_string(SubjectProfile p);

// Behavioural model of a participant. Values are model choices; the two
// presets differ in the directions the human data point to (slower
// initiation, faster and less controlled primary movement, more tremor).
struct VirtualSubjectParams {
  SubjectProfile profile = SubjectProfile::able_bodied;
  double reaction_mean = 0.84;          // observable onset latency, s
  double reaction_sd = 0.45;
  double movement_time_base = 1.2;      // s
  double movement_time_per_bit = 0.6;   // s/bit
  double tremor_sigma = 0.006;          // fraction of full scale, at full effort
  double tremor_time_constant = 0.1;    // s
  double submovement_gain = 0.12;       // share of the distance left to a secondary submovement
  double peak_velocity_scale = 1.0;     // time warp of the primary movement
  double endpoint_scatter = 0.06;       // sd of primary endpoint, fraction of distance
  double correction_delay = 0.25;       // s an error must persist before a correction
  double correction_threshold = 0.5;    // fraction of target half width
  double correction_precision = 0.15;   // relative sd of corrective amplitude
  double capability = 1.0;              // activation gain; 0 pins activation at rest

  static VirtualSubjectParams able_bodied();
  static VirtualSubjectParams sci();
  static VirtualSubjectParams for_profile(SubjectProfile p);

  void validate() const;
  bool operator==(const VirtualSubjectParams&) const = default;
};

struct MinJerkSegment {
  double start = 0.0;
  double duration = 1.0;
  double amplitude = 0.0;

  double end() const { return start + duration; }
  double displacement(double t) const;
  double velocity(double t) const;
};

// One point-to-point movement, times relative to target presentation.
struct MovementPlan {
  double from = 0.0;
  double to = 0.0;
  double reaction_time = 0.0;  // sampled latency until a 5 % displacement
  double start_time = 0.0;     // when the primary segment begins
  double primary_duration = 0.0;
  std::vector<MinJerkSegment> segments;

  double level(double t) const;
  double end_time() const;
};

// Tremor grows with effort: 20 % of tremor_sigma at rest, all of it at
// full scale.
double tremor_scale(double level);

// Fitts-style duration for a movement of the given distance, floored at the
// base time and divided by the profile's velocity scale.
double movement_duration(double distance, const VirtualSubjectParams& params);

MovementPlan make_movement_plan(double from, double to, const VirtualSubjectParams& params, Rng& rng,
                                double onset_threshold = 0.05);

struct ActivationTrajectory {
  MovementPlan plan;
  std::vector<double> t;
  std::vector<double> activation;
};

// Samples a movement at `rate` from presentation (t = 0) until the plan has
// ended, with tremor added and the result clamped to [0, 1].
ActivationTrajectory plan_movement(double from, double to, const VirtualSubjectParams& params, std::uint64_t seed,
                                   double rate = 20.0);

// The subject's learned map from desired cursor position to activation.
// Built from (activation, position) pairs; positions are made monotone.
class InverseModel {
 public:
  InverseModel(std::vector<double> activations, std::vector<double> positions);
  static InverseModel identity();

  double activation_for(double position) const;

 private:
  std::vector<double> activations_;
  std::vector<double> positions_;
};

// Closed-loop participant: plans a minimum-jerk movement when a target
// appears, watches the cursor, and issues corrective submovements when the
// perceived cursor stays off target.
class VirtualSubject {
 public:
  VirtualSubject(VirtualSubjectParams params, std::uint64_t seed, InverseModel model, double onset_threshold = 0.05);

  void present(const Target& target, double t);
  void observe(const CursorSample& cursor);

  // Activation for a frame at time t. Must be called with non-decreasing t.
  double activation(double t);
  double intent(double t) const;
  double gain_estimate() const { return gain_; }

  const VirtualSubjectParams& params() const { return params_; }

 private:
  void retire_segments(double t);

  VirtualSubjectParams params_;
  Rng rng_;
  InverseModel model_;
  double onset_threshold_;

  std::optional<Target> target_;
  double base_ = 0.0;
  std::vector<MinJerkSegment> segments_;
  double busy_until_ = 0.0;

  double tremor_ = 0.0;
  std::optional<double> last_t_;

  std::optional<double> perceived_;
  std::optional<double> last_observed_t_;
  std::optional<double> error_since_;

  // Cursor displacement per unit of intended displacement, re-estimated
  // after every movement from what the subject saw.
  double gain_ = 1.0;
  std::optional<double> intent_at_start_;
  std::optional<double> perceived_at_start_;
};

}  // namespace sonomyo
