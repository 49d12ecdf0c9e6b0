#include "sonomyo/minimum_jerk.hpp"

#include <algorithm>

#include "sonomyo/error.hpp"

namespace sonomyo {

double min_jerk_position(double p0, double p1, double tau) {
  const double s = std::clamp(tau, 0.0, 1.0);
  const double s3 = s * s * s;
  const double s4 = s3 * s;
  const double s5 = s4 * s;
  return p0 + (p0 - p1) * (15.0 * s4 - 6.0 * s5 - 10.0 * s3);
}

double min_jerk_velocity(double p0, double p1, double duration, double tau) {
  if (tau <= 0.0 || tau >= 1.0) return 0.0;
  const double s2 = tau * tau;
  return (p0 - p1) * (60.0 * s2 * tau - 30.0 * s2 * s2 - 30.0 * s2) / duration;
}

std::vector<double> min_jerk_reference(double p0, double p1, double duration, std::span<const double> timestamps) {
  if (!(duration > 0.0)) throw Error("minimum-jerk duration must be positive");
  std::vector<double> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) out.push_back(min_jerk_position(p0, p1, t / duration));
  return out;
}

}  // namespace sonomyo
