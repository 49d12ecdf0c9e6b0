#pragma once

#include <nlohmann/json.hpp>

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sonomyo/metrics.hpp"
#include "sonomyo/session_log.hpp"
#include "sonomyo/stats.hpp"

namespace sonomyo {

struct SessionData {
  std::string id;
  std::string group;
  std::vector<TrialRecord> trials;
};

// Group comes from the log metadata, falling back to the subject profile.
SessionData session_data(const SessionLog& log, std::string id);

struct TrialRow {
  std::string session;
  std::string group;
  std::size_t index = 0;
  TrialMetrics metrics;
};

// One row per scored (non-reset) trial.
std::vector<TrialRow> trial_rows(std::span<const SessionData> sessions);

// Shortest text that parses back to the same double.
std::string format_number(double v);

void write_trial_csv(std::ostream& out, std::span<const TrialRow> rows);

// Names of the per-trial metrics that enter the summary and tests.
const std::vector<std::string>& summary_metrics();

// Alternative used when comparing group a against group b on a metric.
// The able_bodied versus sci ordering gets the directional hypotheses
// (success rate and path efficiency higher; errors, stability and movement
// time lower); everything else is two-sided.
Alternative comparison_alternative(const std::string& metric, const std::string& a, const std::string& b);

// Mean trajectory of all scored trials of one target in one group, on a
// grid of `dt` from presentation, with a minimum-jerk reference starting at
// the group's mean reaction time and reaching the target center at the mean
// movement time.
struct MeanTrajectory {
  std::string group;
  double target = 0.0;
  std::size_t trials = 0;
  std::vector<double> t;
  std::vector<double> position;
  std::vector<double> velocity;  // % full scale per s
  std::vector<double> reference;
  std::vector<double> reference_velocity;
  double movement_start = 0.0;
  double movement_end = 0.0;
  std::optional<double> r_squared;  // over [movement_start, movement_end]
};

std::vector<MeanTrajectory> mean_trajectories(std::span<const SessionData> sessions, double trial_timeout = 10.0,
                                              double dt = 0.05);

void write_plot_series(std::ostream& out, std::span<const MeanTrajectory> series);

// Per-group means and SDs, Fitts fit, Friedman tests over target position,
// and Mann-Whitney comparisons between every pair of groups.
nlohmann::json group_summary(std::span<const SessionData> sessions, FittsForm form = FittsForm::ratio,
                             double trial_timeout = 10.0);

}  // namespace sonomyo
