#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sonomyo/task_engine.hpp"

namespace sonomyo {

// Per-trial outcome measures. Percent quantities are in percent of full
// scale; movement-dependent fields are empty when the defining event never
// happened.
struct TrialMetrics {
  Target target;
  bool succeeded = false;
  bool aborted = false;
  std::optional<double> reaction_time;       // s
  std::optional<double> movement_time;       // s
  std::optional<double> path_efficiency;     // %
  std::optional<double> endpoint_error;      // %, signed target - cursor
  std::optional<double> endpoint_stability;  // %, standard deviation
  double max_velocity = 0.0;                 // % full scale per s
  std::optional<double> r_squared_minjerk;

  bool operator==(const TrialMetrics&) const = default;
};

// Presentation to movement onset.
std::optional<double> reaction_time(const TrialRecord& trial);

// Presentation to first band entry.
std::optional<double> movement_time(const TrialRecord& trial);

// 100 * successes / trials, reset and aborted trials excluded. Throws Error when no
// scored trial is given.
double success_rate(std::span<const TrialRecord> trials);

// 100 * target center / path length travelled from presentation to the
// first in-band sample. Empty when the path length is zero.
std::optional<double> path_efficiency(const TrialRecord& trial);

// Samples of the in-band run that produced success, i.e. those in
// [run start, success time).
std::vector<CursorSample> dwell_window(const TrialRecord& trial);

std::optional<double> endpoint_error(const TrialRecord& trial);
std::optional<double> endpoint_stability(const TrialRecord& trial);

// Largest |dP/dt| from presentation to the terminal event, using a centred
// moving average (up to 5 samples, narrowed at the ends so ramps stay exact)
// followed by central differences. Zero for fewer than 3 samples.
double max_velocity(const TrialRecord& trial);
double max_velocity(std::span<const double> t, std::span<const double> position);

// 1 - SS_res / SS_tot with SS_tot taken about the mean of the reference
// curve. Empty if the reference is constant or sizes differ.
std::optional<double> r_squared(std::span<const double> observed, std::span<const double> reference);

// R^2 of the onset-to-entry segment against a minimum-jerk curve with the
// same endpoints and duration.
std::optional<double> r_squared_minjerk(const TrialRecord& trial);

TrialMetrics compute_metrics(const TrialRecord& trial);

enum class FittsForm { ratio, shannon };

FittsForm parse_fitts_form(std::string_view name);
std::string_view to_string(FittsForm form);

struct FittsPoint {
  double id = 0.0;  // bits
  double mt = 0.0;  // s

  bool operator==(const FittsPoint&) const = default;
};

struct FittsFit {
  double slope = 0.0;       // s/bit
  double intercept = 0.0;   // s
  std::optional<double> throughput;  // bits/s, only for slope > 0
  double r_squared = 0.0;
  std::vector<FittsPoint> points;
};

// log2(D/W), or log2(D/W + 1) for the Shannon form.
double index_of_difficulty(double distance, double width, FittsForm form = FittsForm::ratio);

// Ordinary least squares MT = intercept + slope * ID. Throws
// DegenerateRegressionError when fewer than two distinct IDs are present.
FittsFit fitts_fit(std::span<const FittsPoint> points);

// Points from successful, non-reset trials that entered the band. D is the
// distance from the trial's first sample to the target center and W the
// full band width.
std::vector<FittsPoint> fitts_points(std::span<const TrialRecord> trials, FittsForm form = FittsForm::ratio);

}  // namespace sonomyo
