#pragma once

#include <span>
#include <vector>

namespace sonomyo {

// Point-to-point minimum-jerk position at normalized time tau in [0, 1]:
// p0 + (p0 - p1) * (15 tau^4 - 6 tau^5 - 10 tau^3). tau is clamped, so the
// curve holds its endpoints outside the movement.
double min_jerk_position(double p0, double p1, double tau);

// d/dt of the above for a movement of the given duration.
double min_jerk_velocity(double p0, double p1, double duration, double tau);

// Reference positions at the given timestamps, measured from the start of
// the movement (tau = t / duration).
std::vector<double> min_jerk_reference(double p0, double p1, double duration, std::span<const double> timestamps);

}  // namespace sonomyo
