#pragma once

#include "intersim/common.hpp"

namespace intersim {

/// Intelligent Driver Model parameters for one driver.
///
/// Field names deliberately avoid the usual Greek letters: the reward
/// function reuses them for unrelated quantities.
struct IdmParams {
  double v_desired = 15.0;    ///< desired speed v0 [m/s]
  double gap_min = 2.0;       ///< standstill gap s0 [m]
  double headway_time = 1.5;  ///< time headway T [s]
  double accel_max = 1.5;     ///< maximum acceleration [m/s^2]
  double decel_comf = 2.0;    ///< comfortable deceleration [m/s^2]
  double accel_exp = 4.0;     ///< free-road exponent, >= 1

  /// Throws InvalidInput unless every field is finite and positive and accel_exp >= 1.
  void validate() const;

  bool operator==(const IdmParams&) const = default;
};

/// s*(v, dv) = s0 + max(0, v*T + v*dv / (2*sqrt(a*b))). dv is ego minus leader speed.
double desired_gap(double ego_speed, double speed_delta, const IdmParams& p);

/// IDM acceleration. An infinite gap drops the interaction term.
/// Throws InvalidInput for negative speed, non-positive gap, or non-finite input.
double idm_acceleration(double ego_speed, double gap, double speed_delta, const IdmParams& p);

/// max(0, v + a*dt).
double speed_update(double speed, double accel, double dt);

/// Trapezoidal displacement over one step.
inline double step_displacement(double v_old, double v_new, double dt) {
  return 0.5 * (v_old + v_new) * dt;
}

/// Speed at which IDM is stationary behind a leader at the same speed and `gap`
/// away. Zero when gap <= s0; approaches v_desired as the gap grows.
double equilibrium_speed(double gap, const IdmParams& p);

/// Time to collision: gap / closing speed, infinite for non-closing pairs.
double ttc(double gap, double closing_speed);

/// Distance covered while braking at `decel` from `speed` to rest under the
/// clamped speed update and trapezoidal displacement with step dt.
double discrete_stopping_distance(double speed, double decel, double dt);

}  // namespace intersim
