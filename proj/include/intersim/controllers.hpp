#pragma once

#include <memory>
#include <string>

#include "intersim/env.hpp"

namespace intersim {

/// Acceleration policy for controlled vehicles, queried at decision time.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called once per episode before the first decision.
  virtual void reset(std::uint64_t /*episode_seed*/) {}
  virtual double act(const SimState& state, const VehicleState& vehicle, const Observation& obs) = 0;
};

/// Per-driver IDM, exactly as the kernel drives humans (the IDM-mimic).
class BaselineController : public Controller {
 public:
  std::string name() const override { return "baseline"; }
  double act(const SimState& state, const VehicleState& vehicle, const Observation& obs) override;
};

/// Speed that reaches the stop line at the next green onset, capped by the
/// limit. Returns the limit past the line, when the line is reachable at the
/// limit before the current green ends, and when the approach never turns green.
/// `green_remaining` is ignored unless `color` is green.
double glide_target_speed(double distance, double speed_limit, SignalColor color, double green_remaining,
                          double next_green_onset);

/// Tracks glide_target_speed and never exceeds the IDM acceleration.
class GlideToGreenController : public Controller {
 public:
  explicit GlideToGreenController(double tracking_time_s = 2.0, double min_speed_fraction = 0.5)
      : tracking_time_(tracking_time_s), min_fraction_(min_speed_fraction) {}
  std::string name() const override { return "glide_to_green"; }
  double act(const SimState& state, const VehicleState& vehicle, const Observation& obs) override;

 private:
  double tracking_time_;
  double min_fraction_;
};

/// IDM with the desired speed scaled down; built to cost throughput.
class ThrottledController : public Controller {
 public:
  explicit ThrottledController(double speed_factor = 0.4) : factor_(speed_factor) {}
  std::string name() const override { return "throttled"; }
  double act(const SimState& state, const VehicleState& vehicle, const Observation& obs) override;

 private:
  double factor_;
};

/// Uniform draws over the acceleration bounds, from a per-episode stream.
class RandomController : public Controller {
 public:
  std::string name() const override { return "random"; }
  void reset(std::uint64_t episode_seed) override { rng_ = make_stream(episode_seed, "random-controller"); }
  double act(const SimState& state, const VehicleState& vehicle, const Observation& obs) override;

 private:
  Rng rng_ = make_stream(0, "random-controller");
};

/// "baseline" (alias "idm"), "glide_to_green", "throttled", "random".
/// Throws ConfigError for other names.
std::unique_ptr<Controller> make_controller(const std::string& name);

/// Actions for every live CV of the environment.
AccelMap decide(Controller& controller, const Environment& env, const ObservationMap& observations);

}  // namespace intersim
