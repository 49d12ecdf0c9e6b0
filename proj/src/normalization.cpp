#include "sonomyo/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sonomyo/error.hpp"

namespace sonomyo {

std::size_t BoundTrackerParams::window_capacity() const {
  return static_cast<std::size_t>(std::llround(window_seconds * nominal_rate));
}

void BoundTrackerParams::validate() const {
  if (!(window_seconds > 0.0) || !(nominal_rate > 0.0) || window_capacity() < 2) {
    throw ConfigError("bound tracker window must hold at least 2 samples");
  }
  if (!(shrink_rate > 0.0 && shrink_rate < 1.0)) throw ConfigError("shrink_rate must lie in (0, 1)");
  if (!(margin >= 0.0 && margin < 0.5)) throw ConfigError("margin must lie in [0, 0.5)");
}

BoundTracker::BoundTracker(Bounds initial, BoundTrackerParams params)
    : bounds_(initial), params_(params), capacity_(params.window_capacity()) {
  params_.validate();
  if (!(initial.lower < initial.upper)) {
    throw ConfigError("initial bounds must satisfy lower < upper");
  }
}

const Bounds& BoundTracker::update(double s_raw) {
  if (params_.frozen || !std::isfinite(s_raw)) return bounds_;

  if (s_raw > bounds_.upper) bounds_.upper = s_raw;
  if (s_raw < bounds_.lower) bounds_.lower = s_raw;

  if (window_.size() == capacity_) {
    const auto [lo_it, hi_it] = std::minmax_element(window_.begin(), window_.end());
    const double wmin = *lo_it;
    const double wmax = *hi_it;
    const double slack = params_.margin * bounds_.range();
    Bounds next = bounds_;
    if (wmax < bounds_.upper - slack) next.upper = bounds_.upper - params_.shrink_rate * (bounds_.upper - wmax);
    if (wmin > bounds_.lower + slack) next.lower = bounds_.lower + params_.shrink_rate * (wmin - bounds_.lower);
    if (next.lower < next.upper) bounds_ = next;
  }

  window_.push_back(s_raw);
  if (window_.size() > capacity_) window_.pop_front();
  return bounds_;
}

Orientation parse_orientation(std::string_view name) {
  if (name == "direct") return Orientation::direct;
  if (name == "inverted") return Orientation::inverted;
  throw ConfigError("unknown orientation '" + std::string(name) + "'");
}

std::string_view to_string(Orientation o) { return o == Orientation::direct ? "direct" : "inverted"; }

double normalize(double s_raw, const Bounds& bounds) {
  return std::clamp((s_raw - bounds.lower) / (bounds.upper - bounds.lower), 0.0, 1.0);
}

CursorSample map_to_cursor(double s_norm, Orientation orientation, double timestamp) {
  const double position = orientation == Orientation::direct ? s_norm : 1.0 - s_norm;
  return {std::clamp(position, 0.0, 1.0), s_norm, timestamp};
}

}  // namespace sonomyo
