#include "intersim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace intersim {

namespace {

constexpr double kMinGap = 1e-6;

std::vector<VehicleId>& lane_of(SimState& s, int approach, int lane) {
  return s.lanes[static_cast<std::size_t>(approach)][static_cast<std::size_t>(lane)];
}

const std::vector<VehicleId>& lane_of(const SimState& s, int approach, int lane) {
  return s.lanes[static_cast<std::size_t>(approach)][static_cast<std::size_t>(lane)];
}

const Approach& approach_of(const SimState& s, int approach) {
  return s.spec().topology.approaches[static_cast<std::size_t>(approach)];
}

std::size_t index_in_lane(const std::vector<VehicleId>& lane, VehicleId id) {
  const auto it = std::find(lane.begin(), lane.end(), id);
  if (it == lane.end()) throw Error("vehicle " + std::to_string(id) + " missing from its lane");
  return static_cast<std::size_t>(it - lane.begin());
}

// Keeps the lane ordered front first.
void insert_by_position(SimState& s, std::vector<VehicleId>& lane, VehicleId id) {
  const double pos = s.vehicles.at(id).pos;
  auto it = std::find_if(lane.begin(), lane.end(), [&](VehicleId other) { return s.vehicles.at(other).pos < pos; });
  lane.insert(it, id);
}

int draw_category(Rng& rng, const double* shares, int n) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += shares[i];
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += shares[i];
    if (u < acc) return i;
  }
  return n - 1;
}

VehicleState draw_arrival(SimState& s, int approach) {
  const ScenarioSpec& spec = s.spec();
  const Approach& ap = approach_of(s, approach);
  Rng& rng = s.driver_stream;

  VehicleState v;
  v.id = s.next_id++;
  v.approach = approach;
  v.vclass = uniform01(rng) < spec.fleet.truck_bus_share ? VehicleClass::truck_bus : VehicleClass::car;
  v.fuel = uniform01(rng) < spec.fleet.ev_share ? FuelType::ev : FuelType::ice;
  v.age_band = draw_category(rng, spec.fleet.age_shares.data(), kAgeBands);
  v.turn = static_cast<Turn>(draw_category(rng, spec.fleet.turn_shares.data(), 3));
  v.lane = std::min(ap.lane_count - 1, static_cast<int>(uniform01(rng) * ap.lane_count));
  v.idm = spec.drivers.draw(v.vclass, rng);
  v.length = vehicle_length(v.vclass);
  v.cv_eligible = draw_adoption(spec.adoption_level, s.adoption_stream);
  v.controlled = s.adoption_active && v.cv_eligible;
  v.arrival_step = s.step;
  return v;
}

// Places the vehicle at the lane start if the rear-most vehicle leaves room.
bool try_place(SimState& s, VehicleState v) {
  auto& lane = lane_of(s, v.approach, v.lane);
  const Approach& ap = approach_of(s, v.approach);
  IdmParams p = v.idm;
  p.v_desired = std::min(p.v_desired, ap.speed_limit);
  double speed = p.v_desired;
  if (!lane.empty()) {
    const VehicleState& last = s.vehicles.at(lane.back());
    const double gap = last.pos - last.length;
    if (!(gap > p.gap_min)) return false;
    speed = std::min(speed, equilibrium_speed(gap, p));
    // Slow enough to stop behind the last vehicle at comfortable braking.
    speed = std::min(speed, std::sqrt(2.0 * p.decel_comf * (gap - p.gap_min) + last.speed * last.speed));
  }
  v.pos = 0.0;
  v.speed = std::min(ap.speed_limit, speed);
  v.spawn_step = s.step;
  const VehicleId id = v.id;
  s.vehicles.emplace(id, std::move(v));
  lane.push_back(id);
  s.placed.push_back(id);
  ++s.spawned;
  return true;
}

void refresh_signal(SimState& s) {
  const SignalPlan& plan = s.spec().plan;
  const int n = static_cast<int>(s.spec().topology.approaches.size());
  s.phase = plan.phase_at(s.clock);
  s.colors.assign(static_cast<std::size_t>(n), SignalColor::red);
  for (int a = 0; a < n; ++a) s.colors[static_cast<std::size_t>(a)] = plan.color(a, s.clock);

  for (auto& [id, v] : s.vehicles) {
    const double dist = stop_line_distance(s, v);
    if (dist <= 0.0) {
      v.decision = SignalDecision::none;
      continue;
    }
    const SignalColor c = s.colors[static_cast<std::size_t>(v.approach)];
    if (c == SignalColor::green) {
      v.decision = SignalDecision::none;
    } else if (v.decision == SignalDecision::none) {
      if (c == SignalColor::red) {
        v.decision = SignalDecision::stop;
      } else {
        // Dilemma zone: stop only if the line can be reached at comfortable deceleration.
        const double needed = v.speed * v.speed / (2.0 * v.idm.decel_comf);
        v.decision = dist > needed ? SignalDecision::stop : SignalDecision::go;
      }
    }
  }
}

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim config: dt must be positive");
  if (horizon <= 0) throw ConfigError("sim config: horizon must be positive");
  if (warmup < 0 || warmup >= horizon) throw ConfigError("sim config: warmup must lie in [0, horizon)");
  if (!(accel_bounds.min < 0.0) || !(accel_bounds.max > 0.0))
    throw ConfigError("sim config: accel bounds must satisfy min < 0 < max");
  if (spawn_gate) spawn_gate->validate();
}

void FleetMix::validate() const {
  auto share = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!share(ev_share)) throw ConfigError("fleet: ev_share must lie in [0, 1]");
  if (!share(truck_bus_share)) throw ConfigError("fleet: truck_bus_share must lie in [0, 1]");
  double age = 0.0;
  for (double x : age_shares) {
    if (!(x >= 0.0)) throw ConfigError("fleet: age shares must be non-negative");
    age += x;
  }
  if (!(age > 0.0)) throw ConfigError("fleet: age shares must not all be zero");
  double turns = 0.0;
  for (double x : turn_shares) {
    if (!(x >= 0.0)) throw ConfigError("fleet: turn shares must be non-negative");
    turns += x;
  }
  if (!(turns > 0.0)) throw ConfigError("fleet: turn shares must not all be zero");
}

IdmParams LogNormalDrivers::draw(Rng& rng) const {
  std::array<double, 5> x{};
  for (std::size_t k = 0; k < 5; ++k) {
    std::normal_distribution<double> z(0.0, 1.0);
    x[k] = std::exp(log_mean[k] + log_sd[k] * z(rng));
  }
  return IdmParams{x[0], x[1], x[2], x[3], x[4], accel_exp};
}

IdmParams ClassDrivers::draw(Rng& rng) const {
  if (pool.empty()) return fallback.draw(rng);
  const auto i = std::min(pool.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pool.size())));
  return pool[i];
}

DriverPopulation DriverPopulation::defaults() {
  auto lognormal = [](std::array<double, 5> mean, double sd) {
    LogNormalDrivers d;
    for (std::size_t k = 0; k < 5; ++k) {
      d.log_mean[k] = std::log(mean[k]);
      d.log_sd[k] = sd;
    }
    return d;
  };
  DriverPopulation pop;
  pop.car.fallback = lognormal({20.0, 2.0, 1.5, 1.5, 2.0}, 0.1);
  pop.truck_bus.fallback = lognormal({18.0, 3.0, 2.0, 1.0, 1.5}, 0.1);
  return pop;
}

double vehicle_length(VehicleClass c) {
  return c == VehicleClass::car ? 5.0 : 12.0;
}

void ScenarioSpec::validate() const {
  topology.validate();
  validate_pairing(topology, plan);
  if (inflows_vph.size() != topology.approaches.size())
    throw ConfigError("scenario: one inflow per approach required");
  for (double q : inflows_vph) {
    if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("scenario: inflow must be finite and >= 0");
  }
  fleet.validate();
  if (!(adoption_level >= 0.0 && adoption_level <= 1.0))
    throw ConfigError("scenario: adoption_level must lie in [0, 1]");
}

const VehicleState& SimState::vehicle(VehicleId id) const {
  const auto it = vehicles.find(id);
  if (it == vehicles.end()) throw InvalidInput("unknown vehicle id " + std::to_string(id));
  return it->second;
}

std::size_t SimState::pending_count() const {
  std::size_t n = 0;
  for (const auto& q : pending) n += q.size();
  return n;
}

SimState make_state(std::shared_ptr<const ScenarioSpec> scenario, const SimConfig& config,
                    std::uint64_t episode_seed) {
  if (!scenario) throw ConfigError("scenario missing");
  scenario->validate();
  config.validate();
  SimState s;
  s.scenario = std::move(scenario);
  s.config = config;
  const auto& approaches = s.spec().topology.approaches;
  s.lanes.resize(approaches.size());
  for (std::size_t a = 0; a < approaches.size(); ++a) s.lanes[a].resize(static_cast<std::size_t>(approaches[a].lane_count));
  s.pending.resize(approaches.size());
  s.colors.assign(approaches.size(), SignalColor::red);
  const std::uint64_t arrival_seed = mix_seed(s.spec().arrival_seed, episode_seed);
  for (std::size_t a = 0; a < approaches.size(); ++a) s.arrival_streams.push_back(make_stream(arrival_seed, "arrivals", a));
  s.driver_stream = make_stream(mix_seed(s.spec().driver_seed, episode_seed), "drivers");
  s.adoption_stream = make_stream(mix_seed(s.spec().adoption_seed, episode_seed), "adoption");
  return s;
}

int draw_arrival_count(double inflow_vph, double dt, Rng& rng) {
  if (!(inflow_vph >= 0.0) || !std::isfinite(inflow_vph)) throw InvalidInput("inflow must be finite and >= 0");
  const double mean = inflow_vph * dt / 3600.0;
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> dist(mean);
  return dist(rng);
}

bool draw_adoption(double level, Rng& rng) {
  return uniform01(rng) < level;
}

int spawn_arrivals(SimState& s, int approach) {
  const double inflow = s.spec().inflows_vph[static_cast<std::size_t>(approach)];
  const int count = draw_arrival_count(inflow, s.config.dt, s.arrival_streams[static_cast<std::size_t>(approach)]);
  auto& queue = s.pending[static_cast<std::size_t>(approach)];
  for (int i = 0; i < count; ++i) queue.push_back(draw_arrival(s, approach));
  s.arrived += static_cast<std::uint64_t>(count);

  if (s.config.spawn_gate && !s.config.spawn_gate->is_green(s.clock)) return count;
  // FIFO: a blocked head holds the queue.
  while (!queue.empty()) {
    if (!try_place(s, queue.front())) break;
    queue.pop_front();
  }
  return count;
}

VehicleId insert_vehicle(SimState& s, VehicleState v) {
  const auto& approaches = s.spec().topology.approaches;
  if (v.approach < 0 || v.approach >= static_cast<int>(approaches.size()))
    throw InvalidInput("insert_vehicle: approach out of range");
  if (v.lane < 0 || v.lane >= approaches[static_cast<std::size_t>(v.approach)].lane_count)
    throw InvalidInput("insert_vehicle: lane out of range");
  if (!(v.pos >= 0.0) || !(v.pos < exit_position(s, v.approach)) || !(v.speed >= 0.0) || !std::isfinite(v.speed))
    throw InvalidInput("insert_vehicle: position or speed out of range");
  v.idm.validate();
  for (VehicleId other : lane_of(s, v.approach, v.lane)) {
    const VehicleState& o = s.vehicles.at(other);
    const bool overlap = o.pos >= v.pos ? o.pos - o.length < v.pos : v.pos - v.length < o.pos;
    if (overlap) throw InvalidInput("insert_vehicle: overlaps vehicle " + std::to_string(other));
  }
  v.id = s.next_id++;
  v.arrival_step = s.step;
  v.spawn_step = s.step;
  const VehicleId id = v.id;
  s.vehicles.emplace(id, std::move(v));
  insert_by_position(s, lane_of(s, s.vehicles.at(id).approach, s.vehicles.at(id).lane), id);
  ++s.spawned;
  ++s.arrived;
  return id;
}

double stop_line_distance(const SimState& s, const VehicleState& v) {
  return approach_of(s, v.approach).lane_length - v.pos;
}

double exit_position(const SimState& s, int approach) {
  const auto& internal = s.spec().topology.internal;
  return approach_of(s, approach).lane_length + internal.box_length + internal.exit_length;
}

std::optional<VehicleId> lane_leader_at(const SimState& s, int approach, int lane, double pos) {
  const auto& ids = lane_of(s, approach, lane);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    if (s.vehicles.at(*it).pos >= pos) return *it;
  }
  return std::nullopt;
}

std::optional<VehicleId> lane_follower_at(const SimState& s, int approach, int lane, double pos) {
  for (VehicleId id : lane_of(s, approach, lane)) {
    if (s.vehicles.at(id).pos < pos) return id;
  }
  return std::nullopt;
}

std::vector<LaneChangeEvent> lane_change_step(SimState& s) {
  std::vector<LaneChangeEvent> events;
  std::vector<VehicleId> order;
  order.reserve(s.vehicles.size());
  for (const auto& [id, v] : s.vehicles) order.push_back(id);

  for (VehicleId id : order) {
    VehicleState& v = s.vehicles.at(id);
    const Approach& ap = approach_of(s, v.approach);
    if (ap.lane_count < 2 || v.pos >= ap.lane_length) continue;
    if (ap.lane_turns(v.lane).serves(v.turn)) continue;

    int best = -1;
    for (int l = 0; l < ap.lane_count; ++l) {
      if (!ap.lane_turns(l).serves(v.turn)) continue;
      if (best < 0 || std::abs(l - v.lane) < std::abs(best - v.lane)) best = l;
    }
    if (best < 0) continue;
    const int target = v.lane + (best > v.lane ? 1 : -1);

    bool accepted = true;
    if (auto lid = lane_leader_at(s, v.approach, target, v.pos)) {
      const VehicleState& lead = s.vehicles.at(*lid);
      const double gap = bumper_gap(lead, v);
      accepted = gap > 0.0 && gap >= desired_gap(v.speed, v.speed - lead.speed, v.idm);
    }
    if (accepted) {
      if (auto fid = lane_follower_at(s, v.approach, target, v.pos)) {
        const VehicleState& fol = s.vehicles.at(*fid);
        const double gap = bumper_gap(v, fol);
        accepted = gap > 0.0 && gap >= desired_gap(fol.speed, fol.speed - v.speed, fol.idm);
      }
    }
    if (!accepted) continue;

    auto& from = lane_of(s, v.approach, v.lane);
    from.erase(from.begin() + static_cast<std::ptrdiff_t>(index_in_lane(from, id)));
    events.push_back({id, v.approach, v.lane, target});
    v.lane = target;
    insert_by_position(s, lane_of(s, v.approach, target), id);
  }
  return events;
}

std::vector<LaneChangeEvent> prepare_step(SimState& s) {
  if (s.prepared) return {};
  refresh_signal(s);
  s.lane_changes = lane_change_step(s);
  s.prepared = true;
  return s.lane_changes;
}

Surroundings surroundings(const SimState& s, const VehicleState& v) {
  Surroundings out;
  const auto& lane = lane_of(s, v.approach, v.lane);
  const std::size_t i = index_in_lane(lane, v.id);
  if (i > 0) {
    const VehicleState& lead = s.vehicles.at(lane[i - 1]);
    out.vehicle = LeaderView{bumper_gap(lead, v), lead.speed, lead.id};
  }
  if (v.decision == SignalDecision::stop) {
    const double dist = stop_line_distance(s, v);
    if (dist > 0.0) out.stop_line = LeaderView{dist, 0.0, std::nullopt};
  }
  return out;
}

IdmParams effective_idm(const SimState& s, const VehicleState& v) {
  IdmParams p = v.idm;
  p.v_desired = std::min(p.v_desired, approach_of(s, v.approach).speed_limit);
  return p;
}

double human_acceleration(const SimState& s, const VehicleState& v) {
  const IdmParams p = effective_idm(s, v);
  const Surroundings env = surroundings(s, v);
  double a = idm_acceleration(v.speed, kInf, 0.0, p);
  if (env.vehicle) {
    a = idm_acceleration(v.speed, std::max(env.vehicle->gap, kMinGap), v.speed - env.vehicle->speed, p);
  }
  if (env.stop_line) {
    a = std::min(a, idm_acceleration(v.speed, std::max(env.stop_line->gap, kMinGap), v.speed, p));
  }
  return std::clamp(a, s.config.accel_bounds.min, s.config.accel_bounds.max);
}

StepEvents complete_step(SimState& s, const AccelMap& cv_accels) {
  prepare_step(s);
  StepEvents ev;
  ev.step = s.step;
  ev.lane_changes = std::move(s.lane_changes);
  s.lane_changes.clear();

  // Accelerations are computed from one consistent snapshot before any update.
  std::vector<std::pair<VehicleState*, double>> updates;
  updates.reserve(s.vehicles.size());
  for (auto& [id, v] : s.vehicles) {
    double a = 0.0;
    if (v.controlled) {
      const auto it = cv_accels.find(id);
      if (it == cv_accels.end())
        throw InvalidInput("no acceleration supplied for controlled vehicle " + std::to_string(id));
      a = it->second;
      if (!std::isfinite(a)) throw InvalidInput("non-finite acceleration for vehicle " + std::to_string(id));
    } else {
      a = human_acceleration(s, v);
    }
    updates.emplace_back(&v, a);
  }

  const double dt = s.config.dt;
  for (auto& [v, a] : updates) {
    const double v_new = speed_update(v->speed, a, dt);
    v->pos += step_displacement(v->speed, v_new, dt);
    v->speed = v_new;
    v->accel_prev = v->accel;
    v->accel = a;
  }

  for (const auto& per_approach : s.lanes) {
    for (const auto& lane : per_approach) {
      for (std::size_t i = 1; i < lane.size(); ++i) {
        const VehicleState& lead = s.vehicles.at(lane[i - 1]);
        const VehicleState& fol = s.vehicles.at(lane[i]);
        const double gap = bumper_gap(lead, fol);
        if (gap < 0.0) throw CollisionFault(fol.id, lead.id, gap, s.step);
      }
    }
  }

  ev.samples.reserve(s.vehicles.size());
  for (const auto& [id, v] : s.vehicles) {
    const bool leaving = v.pos >= exit_position(s, v.approach);
    ev.samples.push_back({id, v.approach, v.lane, v.controlled, v.vclass, v.fuel, v.age_band, v.spawn_step, v.pos,
                          v.speed, v.accel, v.accel_prev, leaving});
  }

  for (std::size_t a = 0; a < s.lanes.size(); ++a) {
    const double end = exit_position(s, static_cast<int>(a));
    for (auto& lane : s.lanes[a]) {
      while (!lane.empty() && s.vehicles.at(lane.front()).pos >= end) {
        auto node = s.vehicles.extract(lane.front());
        VehicleState& v = node.mapped();
        v.exit_step = s.step;
        ev.exited.push_back({v.id, v.approach, v.controlled, v.arrival_step, v.spawn_step, s.step});
        lane.erase(lane.begin());
        ++s.exited;
      }
    }
  }
  std::sort(ev.exited.begin(), ev.exited.end(), [](const ExitRecord& x, const ExitRecord& y) { return x.id < y.id; });

  s.placed.clear();
  for (int a = 0; a < static_cast<int>(s.lanes.size()); ++a) ev.arrivals += static_cast<std::size_t>(spawn_arrivals(s, a));
  ev.spawned = s.placed;

  ++s.step;
  s.clock = static_cast<double>(s.step) * dt;
  s.prepared = false;
  return ev;
}

StepEvents advance(SimState& s, const AccelMap& cv_accels) {
  prepare_step(s);
  return complete_step(s, cv_accels);
}

void activate_adoption(SimState& s) {
  s.adoption_active = true;
  for (auto& [id, v] : s.vehicles) v.controlled = v.cv_eligible;
  for (auto& q : s.pending) {
    for (auto& v : q) v.controlled = v.cv_eligible;
  }
}

double fleet_min_ttc(const SimState& s) {
  double best = kInf;
  for (const auto& per_approach : s.lanes) {
    for (const auto& lane : per_approach) {
      for (std::size_t i = 1; i < lane.size(); ++i) {
        const VehicleState& lead = s.vehicles.at(lane[i - 1]);
        const VehicleState& fol = s.vehicles.at(lane[i]);
        best = std::min(best, ttc(std::max(0.0, bumper_gap(lead, fol)), fol.speed - lead.speed));
      }
    }
  }
  return best;
}

}  // namespace intersim
