#include "sonomyo/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "sonomyo/error.hpp"

namespace sonomyo {

CalibrationPlan CalibrationPlan::standard(double flex_duration, double rest_duration) {
  CalibrationPlan plan;
  plan.flex_duration = flex_duration;
  plan.rest_duration = rest_duration;
  plan.prompt_schedule = {{kFlexPhase, 0.0}, {kRestPhase, flex_duration}};
  return plan;
}

double CalibrationPlan::duration_of(const std::string& label) const {
  if (label == kFlexPhase) return flex_duration;
  if (label == kRestPhase) return rest_duration;
  throw ConfigError("unknown calibration phase '" + label + "'");
}

double CalibrationPlan::end() const {
  double end = 0.0;
  for (const PromptEntry& p : prompt_schedule) end = std::max(end, p.start + duration_of(p.label));
  return end;
}

void CalibrationPlan::validate() const {
  if (!(flex_duration > 0.0) || !(rest_duration > 0.0)) throw ConfigError("calibration phases must have positive length");
  if (!(guard_fraction >= 0.0 && guard_fraction < 0.5)) throw ConfigError("guard_fraction must lie in [0, 0.5)");
  bool flex = false;
  bool rest = false;
  for (const PromptEntry& p : prompt_schedule) {
    duration_of(p.label);
    flex = flex || p.label == kFlexPhase;
    rest = rest || p.label == kRestPhase;
  }
  if (!flex || !rest) throw ConfigError("calibration schedule needs a flex and a rest phase");
  std::vector<PromptEntry> sorted = prompt_schedule;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1].start + duration_of(sorted[i - 1].label) > sorted[i].start) {
      throw ConfigError("calibration phases overlap");
    }
  }
}

TrainingDatabase TrainingDatabase::from_frames(Frame rest, Frame motion, std::size_t flex_count,
                                               std::size_t rest_count, double created_at, double sigma) {
  ReferencePair refs(gaussian_smooth(rest, sigma), gaussian_smooth(motion, sigma));
  return TrainingDatabase{std::move(refs), std::move(rest), std::move(motion), flex_count, rest_count, created_at,
                          sigma};
}

namespace {

// Smoothed, centred, unit-norm pixels. A constant frame maps to zeros.
std::vector<double> unit_image(const Frame& frame, double sigma) {
  FilteredFrame f = gaussian_smooth(frame, sigma);
  const double origin = f.values.front();
  double mean = 0.0;
  for (double v : f.values) mean += v - origin;
  mean = origin + mean / static_cast<double>(f.size());
  double ss = 0.0;
  for (double& v : f.values) {
    v -= mean;
    ss += v * v;
  }
  const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
  for (double& v : f.values) v *= inv;
  return std::move(f.values);
}

}  // namespace

std::size_t select_representative_index(std::span<const Frame> frames, double sigma) {
  if (frames.empty()) throw InsufficientDataError("cannot select a representative from no frames");
  if (frames.size() == 1) return 0;
  for (const Frame& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height) {
      throw InvalidFrameError("calibration frames differ in size");
    }
  }

  // Pearson correlation is the dot product of unit-norm centred images, so
  // the summed correlation of frame i with all others is <z_i, sum_j z_j> - 1
  // and the medoid costs two linear passes instead of all pairs.
  std::vector<double> total(frames[0].size(), 0.0);
  for (const Frame& f : frames) {
    const std::vector<double> z = unit_image(f, sigma);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += z[k];
  }

  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::vector<double> z = unit_image(frames[i], sigma);
    double score = 0.0;
    for (std::size_t k = 0; k < total.size(); ++k) score += z[k] * total[k];
    // Scores this close are ties in exact arithmetic (two frames always tie).
    const double tol = 1e-12 * static_cast<double>(frames.size());
    const bool earlier_on_tie = frames[i].timestamp < frames[best].timestamp;
    if (i == 0 || score > best_score + tol || (std::abs(score - best_score) <= tol && earlier_on_tie)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

Frame select_representative(std::span<const Frame> frames, double sigma) {
  return frames[select_representative_index(frames, sigma)];
}

TrainingDatabase run_calibration(FrameSource& source, const CalibrationPlan& plan, double sigma, double created_at,
                                 const PromptCallback& on_prompt) {
  plan.validate();
  std::vector<Frame> flex;
  std::vector<Frame> rest;
  std::vector<bool> announced(plan.prompt_schedule.size(), false);
  std::optional<double> origin;
  std::optional<double> last_t;

  while (true) {
    std::optional<Frame> frame = source.next();
    if (!frame) break;
    validate(*frame);
    if (last_t && !(frame->timestamp > *last_t)) throw InvalidFrameError("calibration frames out of order");
    last_t = frame->timestamp;
    if (!origin) origin = frame->timestamp;
    const double t = frame->timestamp - *origin;
    if (t >= plan.end()) break;

    for (std::size_t i = 0; i < plan.prompt_schedule.size(); ++i) {
      const PromptEntry& p = plan.prompt_schedule[i];
      if (!announced[i] && t >= p.start) {
        announced[i] = true;
        if (on_prompt) on_prompt(p, frame->timestamp);
      }
      const double len = plan.duration_of(p.label);
      const double guard = plan.guard_fraction * len;
      if (t >= p.start + guard && t < p.start + len - guard) {
        (p.label == kFlexPhase ? flex : rest).push_back(*frame);
      }
    }
  }

  if (flex.size() < kMinPhaseFrames || rest.size() < kMinPhaseFrames) {
    throw InsufficientDataError("calibration captured " + std::to_string(flex.size()) + " flex and " +
                                std::to_string(rest.size()) + " rest frames; need at least " +
                                std::to_string(kMinPhaseFrames) + " each");
  }
  Frame motion_ref = select_representative(flex, sigma);
  Frame rest_ref = select_representative(rest, sigma);
  if (pearson2d(gaussian_smooth(rest_ref, sigma), gaussian_smooth(motion_ref, sigma)) >= kMaxReferenceCorrelation) {
    throw IndistinguishableReferencesError("rest and flexion references correlate above " +
                                           std::to_string(kMaxReferenceCorrelation));
  }
  return TrainingDatabase::from_frames(std::move(rest_ref), std::move(motion_ref), flex.size(), rest.size(),
                                       created_at, sigma);
}

}  // namespace sonomyo
