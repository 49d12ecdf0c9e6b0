#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sonomyo/frame.hpp"
#include "sonomyo/frame_pipeline.hpp"
#include "sonomyo/frame_source.hpp"

namespace sonomyo {

inline constexpr const char* kFlexPhase = "flex";
inline constexpr const char* kRestPhase = "rest";

struct PromptEntry {
  std::string label;
  double start = 0.0;  // seconds after the first calibration frame

  bool operator==(const PromptEntry&) const = default;
};

struct CalibrationPlan {
  double flex_duration = 30.0;
  double rest_duration = 30.0;
  std::vector<PromptEntry> prompt_schedule{{kFlexPhase, 0.0}, {kRestPhase, 30.0}};
  // Share of each phase window dropped at both ends before selection.
  double guard_fraction = 0.1;

  static CalibrationPlan standard(double flex_duration = 30.0, double rest_duration = 30.0);

  double duration_of(const std::string& label) const;
  double end() const;
  void validate() const;
  bool operator==(const CalibrationPlan&) const = default;
};

struct TrainingDatabase {
  ReferencePair refs;
  Frame rest_frame;    // unsmoothed selections; refs are their smoothed forms
  Frame motion_frame;
  std::size_t flex_window_frames = 0;
  std::size_t rest_window_frames = 0;
  double created_at = 0.0;  // unix seconds
  double sigma = kDefaultSmoothingSigma;

  // Rebuilds the smoothed references from the stored raw frames.
  static TrainingDatabase from_frames(Frame rest, Frame motion, std::size_t flex_count, std::size_t rest_count,
                                      double created_at, double sigma = kDefaultSmoothingSigma);
};

// Index of the medoid: the frame whose summed correlation with all others
// is largest (earliest wins ties). Frames are smoothed before scoring.
std::size_t select_representative_index(std::span<const Frame> frames, double sigma = kDefaultSmoothingSigma);
Frame select_representative(std::span<const Frame> frames, double sigma = kDefaultSmoothingSigma);

inline constexpr std::size_t kMinPhaseFrames = 5;
inline constexpr double kMaxReferenceCorrelation = 0.999;

using PromptCallback = std::function<void(const PromptEntry& prompt, double timestamp)>;

// Consumes `source` until the schedule is over, buckets frames into phases
// by timestamp, and picks one reference per phase.
TrainingDatabase run_calibration(FrameSource& source, const CalibrationPlan& plan,
                                 double sigma = kDefaultSmoothingSigma, double created_at = 0.0,
                                 const PromptCallback& on_prompt = {});

}  // namespace sonomyo
