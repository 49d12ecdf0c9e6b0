#include "sonomyo/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "sonomyo/error.hpp"
#include "sonomyo/minimum_jerk.hpp"

namespace sonomyo {

using nlohmann::json;

namespace {

std::optional<double> metric_value(const TrialMetrics& m, const std::string& name) {
  if (name == "success") return m.succeeded ? 100.0 : 0.0;
  if (name == "reaction_time") return m.reaction_time;
  if (name == "movement_time") return m.movement_time;
  if (name == "path_efficiency") return m.path_efficiency;
  if (name == "endpoint_error") return m.endpoint_error;
  if (name == "endpoint_stability") return m.endpoint_stability;
  if (name == "max_velocity") return m.max_velocity;
  if (name == "r_squared_minjerk") return m.r_squared_minjerk;
  throw Error("unknown metric '" + name + "'");
}

json summary_json(std::span<const double> values) {
  const Summary s = summarize(values);
  if (s.n == 0) return {{"n", 0}, {"mean", nullptr}, {"sd", nullptr}};
  return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}};
}

std::string optional_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

double position_at(const TrialRecord& trial, double t) {
  // Zero-order hold on the recorded samples, relative to presentation.
  const double abs_t = trial.presented_at() + t;
  const auto it = std::upper_bound(trial.samples.begin(), trial.samples.end(), abs_t,
                                   [](double v, const CursorSample& s) { return v < s.timestamp; });
  if (it == trial.samples.begin()) return trial.samples.front().position;
  return std::prev(it)->position;
}

}  // namespace

SessionData session_data(const SessionLog& log, std::string id) {
  SessionData data;
  data.id = std::move(id);
  if (log.metadata.is_object() && log.metadata.contains("group") && log.metadata["group"].is_string()) {
    data.group = log.metadata["group"].get<std::string>();
  } else {
    data.group = std::string(to_string(log.config.source.profile));
  }
  data.trials = log.trials;
  return data;
}

std::vector<TrialRow> trial_rows(std::span<const SessionData> sessions) {
  std::vector<TrialRow> rows;
  for (const SessionData& s : sessions) {
    for (std::size_t i = 0; i < s.trials.size(); ++i) {
      if (s.trials[i].target.is_reset()) continue;
      rows.push_back({s.id, s.group, i, compute_metrics(s.trials[i])});
    }
  }
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trial_csv(std::ostream& out, std::span<const TrialRow> rows) {
  out << "session,group,trial,target,half_width,succeeded,aborted,reaction_time,movement_time,path_efficiency,"
         "endpoint_error,endpoint_stability,max_velocity,r_squared_minjerk\n";
  for (const TrialRow& r : rows) {
    const TrialMetrics& m = r.metrics;
    out << r.session << ',' << r.group << ',' << r.index << ',' << format_number(m.target.center) << ','
        << format_number(m.target.half_width) << ',' << (m.succeeded ? 1 : 0) << ',' << (m.aborted ? 1 : 0) << ','
        << optional_field(m.reaction_time) << ',' << optional_field(m.movement_time) << ','
        << optional_field(m.path_efficiency) << ',' << optional_field(m.endpoint_error) << ','
        << optional_field(m.endpoint_stability) << ',' << format_number(m.max_velocity) << ','
        << optional_field(m.r_squared_minjerk) << '\n';
  }
}

const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> names{"reaction_time",      "movement_time", "path_efficiency",
                                              "endpoint_error",     "endpoint_stability", "max_velocity",
                                              "r_squared_minjerk"};
  return names;
}

Alternative comparison_alternative(const std::string& metric, const std::string& a, const std::string& b) {
  if (a != "able_bodied" || b != "sci") return Alternative::two_sided;
  if (metric == "success_rate" || metric == "path_efficiency") return Alternative::greater;
  if (metric == "endpoint_error" || metric == "endpoint_stability" || metric == "movement_time") {
    return Alternative::less;
  }
  return Alternative::two_sided;
}

std::vector<MeanTrajectory> mean_trajectories(std::span<const SessionData> sessions, double trial_timeout, double dt) {
  std::map<std::pair<std::string, double>, std::vector<const TrialRecord*>> buckets;
  for (const SessionData& s : sessions) {
    for (const TrialRecord& t : s.trials) {
      if (t.target.is_reset() || t.aborted || t.samples.empty()) continue;
      buckets[{s.group, t.target.center}].push_back(&t);
    }
  }
  const auto n_grid = static_cast<std::size_t>(std::lround(trial_timeout / dt)) + 1;

  std::vector<MeanTrajectory> out;
  for (const auto& [key, trials] : buckets) {
    MeanTrajectory m;
    m.group = key.first;
    m.target = key.second;
    m.trials = trials.size();
    m.t.resize(n_grid);
    m.position.assign(n_grid, 0.0);
    for (std::size_t k = 0; k < n_grid; ++k) m.t[k] = static_cast<double>(k) * dt;
    std::vector<double> rts;
    std::vector<double> mts;
    for (const TrialRecord* t : trials) {
      for (std::size_t k = 0; k < n_grid; ++k) m.position[k] += position_at(*t, m.t[k]);
      if (auto rt = reaction_time(*t)) rts.push_back(*rt);
      if (auto mt = movement_time(*t)) mts.push_back(*mt);
    }
    for (double& p : m.position) p /= static_cast<double>(trials.size());

    m.velocity.assign(n_grid, 0.0);
    for (std::size_t k = 1; k + 1 < n_grid; ++k) {
      m.velocity[k] = 100.0 * (m.position[k + 1] - m.position[k - 1]) / (m.t[k + 1] - m.t[k - 1]);
    }

    m.movement_start = rts.empty() ? 0.0 : summarize(rts).mean;
    m.movement_end = mts.empty() ? trial_timeout : summarize(mts).mean;
    if (m.movement_end <= m.movement_start) m.movement_end = m.movement_start + dt;
    const double duration = m.movement_end - m.movement_start;
    const double p0 = m.position.front();
    m.reference.resize(n_grid);
    m.reference_velocity.resize(n_grid);
    std::vector<double> obs;
    std::vector<double> ref;
    for (std::size_t k = 0; k < n_grid; ++k) {
      const double tau = (m.t[k] - m.movement_start) / duration;
      m.reference[k] = min_jerk_position(p0, m.target, tau);
      m.reference_velocity[k] =
          tau < 0.0 || tau > 1.0 ? 0.0 : 100.0 * min_jerk_velocity(p0, m.target, duration, tau);
      if (tau >= 0.0 && tau <= 1.0) {
        obs.push_back(m.position[k]);
        ref.push_back(m.reference[k]);
      }
    }
    m.r_squared = r_squared(obs, ref);
    out.push_back(std::move(m));
  }
  return out;
}

void write_plot_series(std::ostream& out, std::span<const MeanTrajectory> series) {
  out << "group,target,t,mean_position,minjerk_position,mean_velocity,minjerk_velocity,trials\n";
  for (const MeanTrajectory& m : series) {
    for (std::size_t k = 0; k < m.t.size(); ++k) {
      out << m.group << ',' << format_number(m.target) << ',' << format_number(m.t[k]) << ','
          << format_number(m.position[k]) << ',' << format_number(m.reference[k]) << ','
          << format_number(m.velocity[k]) << ',' << format_number(m.reference_velocity[k]) << ',' << m.trials
          << '\n';
    }
  }
}

json group_summary(std::span<const SessionData> sessions, FittsForm form, double trial_timeout) {
  std::set<std::string> group_names;
  for (const SessionData& s : sessions) group_names.insert(s.group);

  // Per-group collections reused by the pairwise comparisons.
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  json groups = json::object();

  for (const std::string& g : group_names) {
    std::vector<const SessionData*> members;
    for (const SessionData& s : sessions)
      if (s.group == g) members.push_back(&s);

    json entry;
    std::vector<double> rates;
    std::vector<TrialRecord> pooled;
    std::size_t scored = 0;
    std::set<double> targets;
    for (const SessionData* s : members) {
      bool any = false;
      for (const TrialRecord& t : s->trials) {
        if (t.target.is_reset() || t.aborted) continue;
        any = true;
        ++scored;
        targets.insert(t.target.center);
        pooled.push_back(t);
        const TrialMetrics m = compute_metrics(t);
        for (const std::string& name : summary_metrics())
          if (auto v = metric_value(m, name)) values[g][name].push_back(*v);
      }
      if (any) rates.push_back(success_rate(s->trials));
    }
    values[g]["success_rate"] = rates;

    entry["sessions"] = members.size();
    entry["trials"] = scored;
    entry["success_rate"] = summary_json(rates);
    for (const std::string& name : summary_metrics()) entry[name] = summary_json(values[g][name]);

    try {
      const FittsFit fit = fitts_fit(fitts_points(pooled, form));
      entry["fitts"] = {{"form", std::string(to_string(form))},
                        {"slope", fit.slope},
                        {"intercept", fit.intercept},
                        {"throughput", fit.throughput ? json(*fit.throughput) : json(nullptr)},
                        {"r_squared", fit.r_squared},
                        {"points", fit.points.size()}};
    } catch (const DegenerateRegressionError&) {
      entry["fitts"] = nullptr;
    }

    // Friedman over target position: blocks are sessions, treatments the
    // target levels, cells the session mean at that target. Sessions with a
    // missing cell are dropped.
    json friedman = json::object();
    const std::vector<double> levels(targets.begin(), targets.end());
    std::vector<std::string> names{"success"};
    names.insert(names.end(), summary_metrics().begin(), summary_metrics().end());
    for (const std::string& name : names) {
      std::vector<std::vector<double>> blocks;
      for (const SessionData* s : members) {
        std::vector<double> row;
        for (double level : levels) {
          double sum = 0.0;
          int n = 0;
          for (const TrialRecord& t : s->trials) {
            if (t.target.is_reset() || t.aborted || t.target.center != level) continue;
            if (auto v = metric_value(compute_metrics(t), name)) {
              sum += *v;
              ++n;
            }
          }
          if (n == 0) break;
          row.push_back(sum / n);
        }
        if (row.size() == levels.size()) blocks.push_back(std::move(row));
      }
      if (blocks.size() < 2 || levels.size() < 2) {
        friedman[name] = nullptr;
        continue;
      }
      const FriedmanResult fr = friedman_test(blocks);
      friedman[name] = {{"chi2", fr.chi2}, {"p", fr.p}, {"dof", fr.dof}, {"blocks", blocks.size()}};
    }
    entry["friedman_target_position"] = friedman;

    json trajectories = json::object();
    std::vector<SessionData> only;
    for (const SessionData* s : members) only.push_back(*s);
    for (const MeanTrajectory& m : mean_trajectories(only, trial_timeout)) {
      trajectories[format_number(m.target)] = m.r_squared ? json(*m.r_squared) : json(nullptr);
    }
    entry["mean_trajectory_r_squared"] = trajectories;
    groups[g] = entry;
  }

  json comparisons = json::array();
  const std::vector<std::string> ordered(group_names.begin(), group_names.end());
  std::vector<std::string> compared{"success_rate"};
  compared.insert(compared.end(), summary_metrics().begin(), summary_metrics().end());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      const std::string& a = ordered[i];
      const std::string& b = ordered[j];
      json tests = json::object();
      for (const std::string& name : compared) {
        const std::vector<double>& va = values[a][name];
        const std::vector<double>& vb = values[b][name];
        if (va.empty() || vb.empty()) {
          tests[name] = nullptr;
          continue;
        }
        const Alternative alt = comparison_alternative(name, a, b);
        const MannWhitneyResult r = mann_whitney_u(va, vb, alt);
        tests[name] = {{"u", r.u}, {"z", r.z}, {"p", r.p}, {"alternative", std::string(to_string(alt))},
                       {"n_a", va.size()}, {"n_b", vb.size()}};
      }
      comparisons.push_back({{"a", a}, {"b", b}, {"mann_whitney", tests}});
    }
  }
  return {{"groups", groups}, {"comparisons", comparisons}};
}

}  // namespace sonomyo
