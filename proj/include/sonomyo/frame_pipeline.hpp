#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "sonomyo/frame.hpp"

namespace sonomyo {

inline constexpr double kDefaultSmoothingSigma = 0.5;

// Normalized 3x3 Gaussian weights, row-major, offsets -1..1 in each axis.
std::array<double, 9> gaussian_kernel3x3(double sigma = kDefaultSmoothingSigma);

// 3x3 Gaussian smoothing with replicate-edge padding. The kernel is
// separable, so the filter runs as a horizontal then a vertical pass.
FilteredFrame gaussian_smooth(const Frame& frame, double sigma = kDefaultSmoothingSigma);

// Sample Pearson correlation over all pixels. If exactly one side is
// constant the correlation is reported as 0; if both are constant a
// DegenerateCorrelationError is thrown.
double pearson2d(std::span<const double> a, std::span<const double> b);
double pearson2d(const FilteredFrame& a, const FilteredFrame& b);

struct Correlations {
  double rest = 0.0;
  double motion = 0.0;
};

// The two calibration references, both smoothed. Deviations from the mean
// and sums of squares are cached so a frame is scored against both
// references in one pass.
class ReferencePair {
 public:
  ReferencePair(FilteredFrame rest, FilteredFrame motion);

  const FilteredFrame& rest() const { return rest_; }
  const FilteredFrame& motion() const { return motion_; }
  int width() const { return rest_.width; }
  int height() const { return rest_.height; }

  Correlations correlate(const FilteredFrame& frame) const;

 private:
  FilteredFrame rest_;
  FilteredFrame motion_;
  std::vector<double> rest_dev_;
  std::vector<double> motion_dev_;
  double rest_ss_ = 0.0;
  double motion_ss_ = 0.0;
};

struct SonomyoSample {
  double s_raw = 0.0;
  double c_rest = 0.0;
  double c_motion = 0.0;
  double timestamp = 0.0;

  bool operator==(const SonomyoSample&) const = default;
};

// S = (1 - Cm) / ((1 - Cm) + (1 - Cr)). Throws DegenerateSignalError when the
// denominator vanishes.
double sonomyography_signal(double c_rest, double c_motion);

SonomyoSample compute_signal(const FilteredFrame& frame, const ReferencePair& refs);

// Streaming front end: smooth, correlate, emit. Enforces strictly increasing
// timestamps and applies hold-last-value when a frame is degenerate.
class SignalPipeline {
 public:
  explicit SignalPipeline(ReferencePair refs, double sigma = kDefaultSmoothingSigma);

  SonomyoSample process(const Frame& frame);

  const ReferencePair& references() const { return refs_; }
  double sigma() const { return sigma_; }
  std::size_t held_count() const { return held_; }

 private:
  ReferencePair refs_;
  double sigma_;
  std::optional<SonomyoSample> last_;
  std::optional<double> last_timestamp_;
  std::size_t held_ = 0;
};

}  // namespace sonomyo
