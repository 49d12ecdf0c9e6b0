#include "sonomyo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sonomyo/error.hpp"
#include "sonomyo/minimum_jerk.hpp"

namespace sonomyo {

namespace {

// Index of the first sample at or after time t.
std::size_t index_at(const TrialRecord& trial, double t) {
  const auto it = std::lower_bound(trial.samples.begin(), trial.samples.end(), t,
                                   [](const CursorSample& s, double v) { return s.timestamp < v; });
  return static_cast<std::size_t>(it - trial.samples.begin());
}

}  // namespace

std::optional<double> reaction_time(const TrialRecord& trial) {
  const auto onset = trial.first(EventKind::movement_onset);
  if (!onset) return std::nullopt;
  return onset->timestamp - trial.presented_at();
}

std::optional<double> movement_time(const TrialRecord& trial) {
  const auto entry = trial.first(EventKind::band_entry);
  if (!entry) return std::nullopt;
  return entry->timestamp - trial.presented_at();
}

double success_rate(std::span<const TrialRecord> trials) {
  std::size_t total = 0;
  std::size_t hits = 0;
  for (const TrialRecord& t : trials) {
    if (t.target.is_reset() || t.aborted) continue;
    ++total;
    if (t.succeeded) ++hits;
  }
  if (total == 0) throw Error("success rate needs at least one scored trial");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

std::optional<double> path_efficiency(const TrialRecord& trial) {
  const auto entry = trial.first(EventKind::band_entry);
  if (!entry || trial.samples.empty()) return std::nullopt;
  const std::size_t last = std::min(index_at(trial, entry->timestamp), trial.samples.size() - 1);
  double path = 0.0;
  for (std::size_t i = 0; i < last; ++i) path += std::abs(trial.samples[i + 1].position - trial.samples[i].position);
  if (path == 0.0) return std::nullopt;
  return 100.0 * trial.target.center / path;
}

std::vector<CursorSample> dwell_window(const TrialRecord& trial) {
  const auto success = trial.first(EventKind::success);
  if (!success) return {};
  std::optional<double> run_start;
  for (const TrialEvent& e : trial.events) {
    if (e.kind == EventKind::band_entry && e.timestamp <= success->timestamp) run_start = e.timestamp;
  }
  if (!run_start) return {};
  std::vector<CursorSample> out;
  for (const CursorSample& s : trial.samples) {
    if (s.timestamp >= *run_start && s.timestamp < success->timestamp) out.push_back(s);
  }
  return out;
}

std::optional<double> endpoint_error(const TrialRecord& trial) {
  const std::vector<CursorSample> window = dwell_window(trial);
  if (window.empty()) return std::nullopt;
  double sum = 0.0;
  for (const CursorSample& s : window) sum += trial.target.center - s.position;
  return 100.0 * sum / static_cast<double>(window.size());
}

std::optional<double> endpoint_stability(const TrialRecord& trial) {
  const std::vector<CursorSample> window = dwell_window(trial);
  if (window.empty()) return std::nullopt;
  const auto n = static_cast<double>(window.size());
  double mean = 0.0;
  for (const CursorSample& s : window) mean += s.position;
  mean /= n;
  double var = 0.0;
  for (const CursorSample& s : window) var += (s.position - mean) * (s.position - mean);
  return 100.0 * std::sqrt(var / n);
}

double max_velocity(std::span<const double> t, std::span<const double> position) {
  const std::size_t n = std::min(t.size(), position.size());
  if (n < 3) return 0.0;
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = std::min<std::size_t>({2, i, n - 1 - i});
    double acc = 0.0;
    for (std::size_t k = i - r; k <= i + r; ++k) acc += position[k];
    smooth[i] = acc / static_cast<double>(2 * r + 1);
  }
  double best = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dt = t[i + 1] - t[i - 1];
    if (dt <= 0.0) continue;
    best = std::max(best, std::abs(smooth[i + 1] - smooth[i - 1]) / dt);
  }
  return 100.0 * best;
}

double max_velocity(const TrialRecord& trial) {
  const double start = trial.presented_at();
  const auto terminal = trial.terminal();
  std::vector<double> t;
  std::vector<double> p;
  for (const CursorSample& s : trial.samples) {
    if (s.timestamp < start) continue;
    if (terminal && s.timestamp > terminal->timestamp) break;
    t.push_back(s.timestamp);
    p.push_back(s.position);
  }
  return max_velocity(t, p);
}

std::optional<double> r_squared(std::span<const double> observed, std::span<const double> reference) {
  if (observed.size() != reference.size() || observed.empty()) return std::nullopt;
  double mean = 0.0;
  for (double r : reference) mean += r;
  mean /= static_cast<double>(reference.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_tot += (reference[i] - mean) * (reference[i] - mean);
    ss_res += (observed[i] - reference[i]) * (observed[i] - reference[i]);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

std::optional<double> r_squared_minjerk(const TrialRecord& trial) {
  const auto onset = trial.first(EventKind::movement_onset);
  const auto entry = trial.first(EventKind::band_entry);
  if (!onset || !entry || entry->timestamp <= onset->timestamp) return std::nullopt;
  const std::size_t first = index_at(trial, onset->timestamp);
  const std::size_t last = index_at(trial, entry->timestamp);
  if (last >= trial.samples.size() || last <= first) return std::nullopt;

  std::vector<double> rel_t;
  std::vector<double> observed;
  for (std::size_t i = first; i <= last; ++i) {
    rel_t.push_back(trial.samples[i].timestamp - trial.samples[first].timestamp);
    observed.push_back(trial.samples[i].position);
  }
  const double duration = rel_t.back();
  const std::vector<double> reference = min_jerk_reference(observed.front(), observed.back(), duration, rel_t);
  return r_squared(observed, reference);
}

TrialMetrics compute_metrics(const TrialRecord& trial) {
  TrialMetrics m;
  m.target = trial.target;
  m.succeeded = trial.succeeded;
  m.aborted = trial.aborted;
  m.reaction_time = reaction_time(trial);
  m.movement_time = movement_time(trial);
  m.path_efficiency = path_efficiency(trial);
  m.endpoint_error = endpoint_error(trial);
  m.endpoint_stability = endpoint_stability(trial);
  m.max_velocity = max_velocity(trial);
  m.r_squared_minjerk = r_squared_minjerk(trial);
  return m;
}

FittsForm parse_fitts_form(std::string_view name) {
  if (name == "ratio") return FittsForm::ratio;
  if (name == "shannon") return FittsForm::shannon;
  throw ConfigError("unknown Fitts form '" + std::string(name) + "'");
}

std::string_view to_string(FittsForm form) { return form == FittsForm::ratio ? "ratio" : "shannon"; }

double index_of_difficulty(double distance, double width, FittsForm form) {
  if (!(distance > 0.0) || !(width > 0.0)) throw Error("index of difficulty needs positive distance and width");
  return form == FittsForm::ratio ? std::log2(distance / width) : std::log2(distance / width + 1.0);
}

FittsFit fitts_fit(std::span<const FittsPoint> points) {
  FittsFit fit;
  fit.points.assign(points.begin(), points.end());
  if (points.size() < 2) throw DegenerateRegressionError("Fitts regression needs at least two points");
  const auto n = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const FittsPoint& p : points) {
    mx += p.id;
    my += p.mt;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const FittsPoint& p : points) {
    sxx += (p.id - mx) * (p.id - mx);
    sxy += (p.id - mx) * (p.mt - my);
    syy += (p.mt - my) * (p.mt - my);
  }
  if (sxx == 0.0) throw DegenerateRegressionError("all index-of-difficulty values are equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (fit.slope > 0.0) fit.throughput = 1.0 / fit.slope;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

std::vector<FittsPoint> fitts_points(std::span<const TrialRecord> trials, FittsForm form) {
  std::vector<FittsPoint> out;
  for (const TrialRecord& t : trials) {
    if (t.target.is_reset() || !t.succeeded || t.samples.empty()) continue;
    const auto mt = movement_time(t);
    if (!mt) continue;
    const double distance = std::abs(t.target.center - t.samples.front().position);
    if (distance <= 0.0) continue;
    out.push_back({index_of_difficulty(distance, 2.0 * t.target.half_width, form), *mt});
  }
  return out;
}

}  // namespace sonomyo
