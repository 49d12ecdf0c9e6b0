#pragma once

#include <cstddef>
#include <deque>
#include <string_view>

namespace sonomyo {

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;

  double range() const { return upper - lower; }
  bool operator==(const Bounds&) const = default;
};

struct BoundTrackerParams {
  double window_seconds = 10.0;
  double nominal_rate = 20.0;  // frames per second
  double shrink_rate = 0.01;   // fraction of the gap closed per frame
  double margin = 0.05;        // fraction of the current range
  bool frozen = false;         // ablation switch: keep calibration bounds

  std::size_t window_capacity() const;
  void validate() const;
  bool operator==(const BoundTrackerParams&) const = default;
};

// Online normalization bounds. New extremes widen the bounds at once; bounds
// that the recent window no longer reaches are pulled in slowly. Once the
// window has filled, contraction on a side happens only while the window
// extreme sits more than margin*range inside that bound.
class BoundTracker {
 public:
  BoundTracker(Bounds initial, BoundTrackerParams params);

  const Bounds& update(double s_raw);

  const Bounds& bounds() const { return bounds_; }
  const BoundTrackerParams& params() const { return params_; }
  std::size_t capacity() const { return capacity_; }
  const std::deque<double>& window() const { return window_; }

 private:
  Bounds bounds_;
  BoundTrackerParams params_;
  std::size_t capacity_;
  std::deque<double> window_;
};

enum class Orientation { direct, inverted };

Orientation parse_orientation(std::string_view name);
std::string_view to_string(Orientation o);

struct CursorSample {
  double position = 0.0;  // 0 = bottom, 1 = top
  double s_norm = 0.0;
  double timestamp = 0.0;

  bool operator==(const CursorSample&) const = default;
};

double normalize(double s_raw, const Bounds& bounds);

// Inverted is the default so that full flexion (S = 0) drives the cursor to
// the top of the screen.
CursorSample map_to_cursor(double s_norm, Orientation orientation = Orientation::inverted, double timestamp = 0.0);

}  // namespace sonomyo
