#include "intersim/idm.hpp"

#include <algorithm>
#include <cmath>

namespace intersim {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidInput(std::string(what) + " must be finite");
}

}  // namespace

void IdmParams::validate() const {
  const double fields[] = {v_desired, gap_min, headway_time, accel_max, decel_comf, accel_exp};
  for (double f : fields) {
    if (!std::isfinite(f) || f <= 0.0) throw InvalidInput("IDM parameters must be finite and positive");
  }
  if (accel_exp < 1.0) throw InvalidInput("IDM accel_exp must be >= 1");
}

double desired_gap(double ego_speed, double speed_delta, const IdmParams& p) {
  require_finite(ego_speed, "ego_speed");
  require_finite(speed_delta, "speed_delta");
  if (ego_speed < 0.0) throw InvalidInput("ego_speed must be non-negative");
  const double dynamic =
      ego_speed * p.headway_time + ego_speed * speed_delta / (2.0 * std::sqrt(p.accel_max * p.decel_comf));
  return p.gap_min + std::max(0.0, dynamic);
}

double idm_acceleration(double ego_speed, double gap, double speed_delta, const IdmParams& p) {
  require_finite(ego_speed, "ego_speed");
  require_finite(speed_delta, "speed_delta");
  if (std::isnan(gap) || gap == -kInf) throw InvalidInput("gap must be positive or +inf");
  if (ego_speed < 0.0) throw InvalidInput("ego_speed must be non-negative");
  if (gap <= 0.0) throw InvalidInput("gap must be positive or +inf");

  const double free_term = std::pow(ego_speed / p.v_desired, p.accel_exp);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double ratio = desired_gap(ego_speed, speed_delta, p) / gap;
    interaction = ratio * ratio;
  }
  return p.accel_max * (1.0 - free_term - interaction);
}

double speed_update(double speed, double accel, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  return std::max(0.0, speed + accel * dt);
}

double equilibrium_speed(double gap, const IdmParams& p) {
  if (!(gap > p.gap_min)) return 0.0;
  if (!std::isfinite(gap)) return p.v_desired;
  // Stationary IDM with dv = 0: (s0 + vT)^2 / gap^2 = 1 - (v/v0)^exp.
  // The residual is monotone in v on [0, v0], so bisection is exact enough.
  auto residual = [&](double v) {
    const double r = (p.gap_min + v * p.headway_time) / gap;
    return 1.0 - std::pow(v / p.v_desired, p.accel_exp) - r * r;
  };
  double lo = 0.0;
  double hi = p.v_desired;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double ttc(double gap, double closing_speed) {
  if (gap < 0.0) throw InvalidInput("gap must be non-negative");
  if (!(closing_speed > 0.0)) return kInf;
  return gap / closing_speed;
}

double discrete_stopping_distance(double speed, double decel, double dt) {
  if (speed <= 0.0) return 0.0;
  // n full braking steps then one partial step that ends at rest.
  const double per_step = decel * dt;
  const double full_steps = std::floor(speed / per_step);
  const double remainder = speed - full_steps * per_step;
  return (speed * speed - remainder * remainder) / (2.0 * decel) + 0.5 * remainder * dt;
}

}  // namespace intersim
