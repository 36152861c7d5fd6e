#include "intersim/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace intersim {

double BaselineController::act(const SimState& state, const VehicleState& vehicle, const Observation&) {
  return human_acceleration(state, vehicle);
}

double glide_target_speed(double distance, double speed_limit, SignalColor color, double green_remaining,
                          double next_green_onset) {
  if (distance <= 0.0) return speed_limit;
  if (color == SignalColor::green && distance / speed_limit < green_remaining) return speed_limit;
  if (!std::isfinite(next_green_onset) || next_green_onset <= 0.0) return speed_limit;
  return std::min(speed_limit, distance / next_green_onset);
}

double GlideToGreenController::act(const SimState& state, const VehicleState& vehicle, const Observation& obs) {
  const double idm = human_acceleration(state, vehicle);
  const SignalPlan& plan = state.spec().plan;
  const double target =
      glide_target_speed(obs.distance_to_signal, obs.speed_limit, obs.signal,
                         plan.time_in_state_remaining(vehicle.approach, state.clock),
                         plan.time_to_green(vehicle.approach, state.clock, 1));
  if (target < min_fraction_ * obs.speed_limit) return idm;
  const double track = (target - vehicle.speed) / tracking_time_;
  return std::min(track, idm);
}

double ThrottledController::act(const SimState& state, const VehicleState& vehicle, const Observation&) {
  VehicleState slow = vehicle;
  slow.idm.v_desired = factor_ * effective_idm(state, vehicle).v_desired;
  return human_acceleration(state, slow);
}

double RandomController::act(const SimState& state, const VehicleState&, const Observation&) {
  return uniform_in(rng_, state.config.accel_bounds.min, state.config.accel_bounds.max);
}

std::unique_ptr<Controller> make_controller(const std::string& name) {
  if (name == "baseline" || name == "idm") return std::make_unique<BaselineController>();
  if (name == "glide_to_green") return std::make_unique<GlideToGreenController>();
  if (name == "throttled") return std::make_unique<ThrottledController>();
  if (name == "random") return std::make_unique<RandomController>();
  throw ConfigError("unknown controller '" + name + "'");
}

AccelMap decide(Controller& controller, const Environment& env, const ObservationMap& observations) {
  AccelMap actions;
  for (const auto& [id, obs] : observations) actions[id] = controller.act(env.state(), env.state().vehicles.at(id), obs);
  return actions;
}

}  // namespace intersim
