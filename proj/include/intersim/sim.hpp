#pragma once

#include <array>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "intersim/common.hpp"
#include "intersim/idm.hpp"
#include "intersim/signal.hpp"

namespace intersim {

struct AccelBounds {
  double min = -4.5;  // m/s^2, < 0
  double max = 3.0;   // m/s^2, > 0
  bool operator==(const AccelBounds&) const = default;
};

struct SimConfig {
  double dt = 0.5;
  int horizon = 1000;  // total steps, warmup included
  int warmup = 50;
  AccelBounds accel_bounds;
  std::optional<SpawnGate> spawn_gate;

  void validate() const;
  bool operator==(const SimConfig&) const = default;
};

inline constexpr int kAgeBands = 3;

/// Composition of the arriving traffic.
struct FleetMix {
  double ev_share = 0.0;
  double truck_bus_share = 0.05;
  std::array<double, kAgeBands> age_shares{0.40, 0.35, 0.25};
  std::array<double, 3> turn_shares{0.2, 0.6, 0.2};  // left, straight, right

  void validate() const;
  bool operator==(const FleetMix&) const = default;
};

/// Lognormal driver parameters over [v0, s0, T, a, b].
struct LogNormalDrivers {
  std::array<double, 5> log_mean{};
  std::array<double, 5> log_sd{};
  double accel_exp = 4.0;

  IdmParams draw(Rng& rng) const;
  bool operator==(const LogNormalDrivers&) const = default;
};

/// Driver parameter source for one vehicle class: an empirical pool (e.g.
/// posterior draws) when non-empty, otherwise the lognormal fallback.
struct ClassDrivers {
  std::vector<IdmParams> pool;
  LogNormalDrivers fallback;

  IdmParams draw(Rng& rng) const;
  bool operator==(const ClassDrivers&) const = default;
};

struct DriverPopulation {
  ClassDrivers car;
  ClassDrivers truck_bus;

  /// Shipped defaults used when no calibration is supplied.
  static DriverPopulation defaults();

  const ClassDrivers& of(VehicleClass c) const { return c == VehicleClass::car ? car : truck_bus; }
  ClassDrivers& of(VehicleClass c) { return c == VehicleClass::car ? car : truck_bus; }
  IdmParams draw(VehicleClass c, Rng& rng) const { return of(c).draw(rng); }
  bool operator==(const DriverPopulation&) const = default;
};

double vehicle_length(VehicleClass c);

/// Everything the kernel needs to instantiate one traffic scenario.
struct ScenarioSpec {
  std::string id;
  IntersectionTopology topology;
  SignalPlan plan;
  std::vector<double> inflows_vph;  // per approach
  FleetMix fleet;
  double adoption_level = 0.0;
  std::uint64_t arrival_seed = 1;
  std::uint64_t driver_seed = 2;
  std::uint64_t adoption_seed = 3;
  DriverPopulation drivers = DriverPopulation::defaults();

  void validate() const;
};

enum class SignalDecision : std::uint8_t { none, stop, go };

struct VehicleState {
  VehicleId id = 0;
  VehicleClass vclass = VehicleClass::car;
  FuelType fuel = FuelType::ice;
  int age_band = 0;
  bool controlled = false;
  bool cv_eligible = false;  // adoption draw, applied once adoption is active
  int approach = 0;
  int lane = 0;
  double pos = 0.0;  // front bumper, metres from lane start; stop line at lane_length
  double speed = 0.0;
  double accel = 0.0;       // applied during the last step
  double accel_prev = 0.0;  // applied during the step before
  double length = 5.0;
  Turn turn = Turn::straight;
  IdmParams idm;
  std::int64_t arrival_step = 0;
  std::int64_t spawn_step = 0;
  std::optional<std::int64_t> exit_step;
  SignalDecision decision = SignalDecision::none;
};

struct LeaderView {
  double gap = kInf;  // bumper to bumper, or front bumper to stop line
  double speed = 0.0;
  std::optional<VehicleId> id;  // empty for the stop line
};

/// Obstacles ahead of a vehicle: its lane leader and, when the vehicle has
/// decided to stop for the signal, the stop line as a stationary leader.
struct Surroundings {
  std::optional<LeaderView> vehicle;
  std::optional<LeaderView> stop_line;
};

struct LaneChangeEvent {
  VehicleId id;
  int approach;
  int from_lane;
  int to_lane;
};

struct ExitRecord {
  VehicleId id;
  int approach;
  bool controlled;
  std::int64_t arrival_step;
  std::int64_t spawn_step;
  std::int64_t exit_step;
};

/// Post-update kinematics of a vehicle in one step.
struct VehicleSample {
  VehicleId id;
  int approach;
  int lane;
  bool controlled;
  VehicleClass vclass;
  FuelType fuel;
  int age_band;
  std::int64_t spawn_step;
  double pos;
  double speed;
  double accel;
  double accel_prev;
  bool exited;
};

struct StepEvents {
  std::int64_t step = 0;  // index of the completed step, starting at 0
  std::vector<LaneChangeEvent> lane_changes;
  std::vector<VehicleSample> samples;
  std::vector<ExitRecord> exited;
  std::vector<VehicleId> spawned;
  std::size_t arrivals = 0;
};

using AccelMap = std::map<VehicleId, double>;

struct SimState {
  std::shared_ptr<const ScenarioSpec> scenario;
  SimConfig config;

  std::int64_t step = 0;
  double clock = 0.0;  // step * dt, the time at the start of the current step
  bool prepared = false;
  bool adoption_active = false;

  std::map<VehicleId, VehicleState> vehicles;
  std::vector<std::vector<std::vector<VehicleId>>> lanes;  // [approach][lane], front first
  std::vector<std::deque<VehicleState>> pending;           // [approach] arrivals not yet placed

  std::vector<SignalColor> colors;  // per approach, valid after prepare_step
  PhaseClock phase;
  std::vector<LaneChangeEvent> lane_changes;  // made by the current step's prepare
  std::vector<VehicleId> placed;              // vehicles placed by the latest spawn pass

  std::vector<Rng> arrival_streams;  // per approach
  Rng driver_stream;
  Rng adoption_stream;

  std::uint64_t spawned = 0;
  std::uint64_t exited = 0;
  std::uint64_t arrived = 0;
  VehicleId next_id = 1;

  const ScenarioSpec& spec() const { return *scenario; }
  const VehicleState& vehicle(VehicleId id) const;
  std::size_t pending_count() const;
};

/// Builds the initial (empty) state. episode_seed is mixed into every stream so
/// one scenario can be replayed under many seeds.
SimState make_state(std::shared_ptr<const ScenarioSpec> scenario, const SimConfig& config,
                    std::uint64_t episode_seed);

/// Places a scripted vehicle at v.pos on its lane, assigning the next id and
/// counting it as spawned. Throws InvalidInput if it overlaps a neighbour or
/// lies outside the approach. Returns the id.
VehicleId insert_vehicle(SimState& state, VehicleState v);

/// Poisson(inflow * dt / 3600) arrivals for one step.
int draw_arrival_count(double inflow_vph, double dt, Rng& rng);

/// True with probability `level`; one uniform draw per call.
bool draw_adoption(double level, Rng& rng);

/// Draws this step's arrivals for one approach into its pending queue, then
/// places queued vehicles on free lanes (unless the spawn gate is red).
/// Returns the number of new arrivals.
int spawn_arrivals(SimState& state, int approach);

/// Intention-driven lane changes, one lane per vehicle per step.
std::vector<LaneChangeEvent> lane_change_step(SimState& state);

/// Phase of a step that precedes the action: refresh signal colours and stop
/// decisions at the current clock, then lane changes. Idempotent per step.
std::vector<LaneChangeEvent> prepare_step(SimState& state);

/// Remainder of a step: accelerations, kinematic update, collision check,
/// exits, arrivals. Every controlled vehicle needs an entry in cv_accels.
/// Throws CollisionFault if any lane ends with a negative gap.
StepEvents complete_step(SimState& state, const AccelMap& cv_accels);

/// prepare_step + complete_step.
StepEvents advance(SimState& state, const AccelMap& cv_accels);

/// Flags every present and future adoption-eligible vehicle as controlled.
void activate_adoption(SimState& state);

Surroundings surroundings(const SimState& state, const VehicleState& v);

/// IDM parameters a vehicle actually drives with (desired speed capped by the limit).
IdmParams effective_idm(const SimState& state, const VehicleState& v);

/// Acceleration the kernel applies to a human-driven vehicle: IDM against the
/// more restrictive of lane leader and stop line, clamped to accel bounds.
double human_acceleration(const SimState& state, const VehicleState& v);

double stop_line_distance(const SimState& state, const VehicleState& v);
double exit_position(const SimState& state, int approach);

/// Gap from follower's front bumper to leader's rear bumper.
inline double bumper_gap(const VehicleState& leader, const VehicleState& follower) {
  return leader.pos - leader.length - follower.pos;
}

/// Vehicles of one lane whose position is ahead/behind `pos` (nearest first).
std::optional<VehicleId> lane_leader_at(const SimState& state, int approach, int lane, double pos);
std::optional<VehicleId> lane_follower_at(const SimState& state, int approach, int lane, double pos);

/// Minimum TTC over all same-lane leader/follower pairs (infinite if none close).
double fleet_min_ttc(const SimState& state);

}  // namespace intersim
