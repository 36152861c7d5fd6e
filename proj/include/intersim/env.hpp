#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "intersim/context.hpp"
#include "intersim/emissions.hpp"
#include "intersim/sim.hpp"
#include "intersim/trace.hpp"

namespace intersim {

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

struct RewardConfig {
  double eta = 0.5;
  double stop_penalty = -2.5;     // -5 per second at dt = 0.5
  double emission_weight = -0.5;  // per gram
  double stop_threshold = 1.0;    // m/s
  double comfort_w = 0.0;
  double jerk_w = 0.0;
  double ttc_w = 0.0;
  double ttc_cap = 20.0;  // s

  void validate() const;
  static RewardConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool operator==(const RewardConfig&) const = default;
};

/// One vehicle of the post-step fleet.
struct FleetEntry {
  VehicleId id = 0;
  double speed = 0.0;
  double emission_g = 0.0;  // emitted during the step (rate * dt)
  double accel = 0.0;
  double accel_prev = 0.0;
};

struct RewardBreakdown {
  double velocity = 0.0;  // v_i
  double stop = 0.0;      // stop_penalty * [v_i < tau]
  double emission = 0.0;  // emission_weight * e_i
  double ego = 0.0;       // velocity + stop + emission
  double fleet = 0.0;     // mean of ego over the fleet
  double comfort = 0.0;   // -comfort_w * (eta * mean|a| + (1 - eta) * |a_i|)
  double jerk_raw = 0.0;  // |a_i - a_i,prev|
  double jerk_rate = 0.0; // jerk_raw / dt
  double jerk = 0.0;      // -jerk_w * (eta * mean jerk_rate + (1 - eta) * jerk_rate)
  double fleet_ttc = 0.0; // ttc_w * min(fleet min TTC, ttc_cap)
  double total = 0.0;     // eta * fleet + (1 - eta) * ego + comfort + jerk + fleet_ttc
};

inline constexpr std::size_t kRewardDim = 11;
std::array<double, kRewardDim> flatten(const RewardBreakdown& r);
const std::vector<std::string>& reward_field_names();

double comfort_term(double accel);
/// |a - a_prev| / dt.
double jerk_term(double accel, double accel_prev, double dt);
/// min(fleet_min_ttc, cap).
double fleet_ttc_term(double fleet_min_ttc, double cap);

/// Rewards for `agents` (each must be in the fleet). Throws InvalidInput on an
/// empty fleet or an agent missing from it.
std::map<VehicleId, RewardBreakdown> compute_rewards(const std::vector<FleetEntry>& fleet,
                                                     const std::vector<VehicleId>& agents, double fleet_min_ttc,
                                                     double dt, const RewardConfig& cfg);

// ---------------------------------------------------------------------------
// Safety layer
// ---------------------------------------------------------------------------

struct SafetyObstacle {
  double gap = kInf;          // m, bumper to bumper or to the stop line
  double speed = 0.0;         // m/s
  double leader_decel = 0.0;  // braking assumed for the one-step rule
  double margin = 0.0;        // gap kept by the one-step rule
};

struct SafetyContext {
  double speed = 0.0;
  double dt = 0.5;
  AccelBounds bounds;
  std::vector<SafetyObstacle> obstacles;
  /// Acceleration the vehicle's own driver model would apply. When set, the
  /// clamp never overrides it in either direction.
  std::optional<double> reference;
  /// Braking limit for actions below the reference (positive, m/s^2).
  double comfort_decel = kInf;
};

/// Largest acceleration that (i) keeps the next-step gap >= margin while the
/// obstacle brakes at leader_decel and (ii) still lets the ego stop behind the
/// obstacle when both brake at |bounds.min| from the next step on. -inf when
/// no acceleration satisfies the constraints.
double safe_acceleration(const SafetyContext& ctx);

/// Interval [lo, hi] the clamp maps into. Without a reference it is
/// [bounds.min, min(bounds.max, a_safe)]; with reference r it is
/// [min(r, max(bounds.min, -comfort_decel)), min(bounds.max, max(a_safe, r))].
std::pair<double, double> safe_interval(const SafetyContext& ctx);

/// max(min(proposed, hi), lo) over safe_interval.
double safety_clamp(double proposed, const SafetyContext& ctx);

/// Lane leader (margin gap_min, braking at its decel_comf) and, for a vehicle
/// that has decided to stop, the stop line as a stationary obstacle. The
/// reference is the kernel's IDM acceleration for the vehicle.
SafetyContext safety_context(const SimState& state, const VehicleState& v);

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

inline constexpr double kSensingCap = 100.0;  // m
inline constexpr double kUnknownTime = -1.0;  // encodes an infinite signal time

enum class Location { approaching, at, exiting };

struct NeighborObs {
  bool present = false;
  double speed = 0.0;
  double distance = kSensingCap;  // front to front, m
  /// Direction the neighbour wants to change lanes in; nullopt when it does not.
  std::optional<Turn> turn_signal;
};

/// Neighbour slot order.
enum class Slot { same_leader, same_follower, left_leader, left_follower, right_leader, right_follower };
inline constexpr std::size_t kNeighborSlots = 6;

struct Observation {
  // Ego
  double speed = 0.0;
  double distance_to_signal = 0.0;  // to the stop line, negative once past it
  SignalColor signal = SignalColor::red;
  double phase_time_remaining = 0.0;
  double next_green_2nd = 0.0;
  double next_green_3rd = 0.0;
  Location location = Location::approaching;
  int lane_index = 0;
  Turn turn = Turn::straight;
  // Neighbours
  std::array<NeighborObs, kNeighborSlots> neighbors{};
  // Observed context
  double adoption_level = 0.0;
  double phase_green_s = 0.0;
  double phase_yellow_s = 0.0;
  double phase_red_s = 0.0;
  double temperature = 0.0;
  double humidity = 0.0;
  bool is_ev = false;
  int lane_count = 0;
  double lane_length = 0.0;
  double speed_limit = 0.0;
};

inline constexpr std::size_t kObservationDim = 61;
using FlatObservation = std::array<double, kObservationDim>;

struct LayoutField {
  std::string name;
  std::size_t offset;
  std::size_t width;
};

/// Field-by-field layout of flatten(Observation), in order.
const std::vector<LayoutField>& observation_layout();
FlatObservation flatten(const Observation& obs);

using ObservationMap = std::map<VehicleId, Observation>;

/// Observation of vehicle v at decision time (after prepare_step).
Observation observe(const SimState& state, const ContextVector& ctx, const VehicleState& v);

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct EpisodeSpec {
  ContextVector context;
  SimConfig sim;
  RewardConfig reward;
  DriverPopulation drivers = DriverPopulation::defaults();
  EmissionCoefficients coefficients;
  std::string coefficients_sha256;
  std::string controller = "baseline";  // CV controller name, resolved by the caller
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses {"format":"intersim-episode","version":1,...}. `base` resolves
/// relative paths (dataset, coefficient file).
EpisodeSpec episode_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base);
EpisodeSpec load_episode_spec(const std::filesystem::path& path);

struct StepInfo {
  std::vector<VehicleId> exited;
  std::vector<std::string> warnings;
  double fleet_emission_g = 0.0;
  std::uint64_t throughput = 0;  // exits since warmup ended
  double min_ttc = kInf;
  std::map<VehicleId, double> realized;  // accelerations after the safety clamp
};

struct StepResult {
  ObservationMap observations;
  std::map<VehicleId, RewardBreakdown> rewards;
  bool done = false;
  StepInfo info;
  StepEvents events;
};

using TraceSink = std::function<void(const std::vector<TraceRow>&)>;

class Environment {
 public:
  explicit Environment(EpisodeSpec spec);

  /// Receives the decision-time rows of every step, warmup included.
  void set_trace_sink(TraceSink sink) { sink_ = std::move(sink); }

  /// Rebuilds the state, runs the human-only warmup and returns the CV observations.
  ObservationMap reset();

  /// Every live CV needs an action; actions for human vehicles are ignored
  /// with a warning; unknown ids throw InvalidInput.
  StepResult step(const AccelMap& actions);

  /// Live controlled vehicles, ascending id.
  std::vector<VehicleId> agents() const;
  ObservationMap observations() const;

  bool done() const { return steps_ >= spec_.sim.horizon - spec_.sim.warmup; }
  int steps_taken() const { return steps_; }
  const SimState& state() const { return *state_; }
  const EpisodeSpec& spec() const { return spec_; }
  std::shared_ptr<const ScenarioSpec> scenario() const { return scenario_; }

 private:
  EpisodeSpec spec_;
  std::shared_ptr<const ScenarioSpec> scenario_;
  std::optional<SimState> state_;
  int steps_ = 0;
  std::uint64_t throughput_ = 0;
  TraceSink sink_;

  StepEvents run_step(const AccelMap& accels);
};

/// Emission of one post-step sample in grams over the step.
double sample_emission_g(const VehicleSample& s, const ContextVector& ctx, const EmissionCoefficients& c, double dt);

}  // namespace intersim
