#include "intersim/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "intersim/io.hpp"

namespace intersim {

namespace {

using nlohmann::json;

constexpr double kStopMargin = 1e-6;  // keeps rounding from reporting a zero gap as overlap
constexpr int kBisection = 80;

double displacement(double speed, double accel, double dt) {
  return step_displacement(speed, speed_update(speed, accel, dt), dt);
}

double one_step_bound(double v, double dt, const SafetyObstacle& o) {
  const double d_leader = displacement(o.speed, -o.leader_decel, dt);
  const double room = o.gap + d_leader - o.margin;
  if (room < 0.5 * v * dt) return -kInf;
  return 2.0 * (room - v * dt) / (dt * dt);
}

// Largest a such that, with the obstacle braking at b from now on and the ego
// braking at b after this step, the ego ends up behind the obstacle.
double stopping_bound(double v, double dt, double b, double hi, const SafetyObstacle& o) {
  const double vl_next = speed_update(o.speed, -b, dt);
  const double obstacle_reach = o.gap + step_displacement(o.speed, vl_next, dt);
  const double obstacle_stop = obstacle_reach + discrete_stopping_distance(vl_next, b, dt);
  auto ok = [&](double a) {
    const double v_next = speed_update(v, a, dt);
    const double d = step_displacement(v, v_next, dt);
    return d <= obstacle_reach - kStopMargin && d + discrete_stopping_distance(v_next, b, dt) <= obstacle_stop - kStopMargin;
  };
  double lo = -v / dt;
  if (!ok(lo)) return -kInf;
  if (ok(hi)) return hi;
  for (int i = 0; i < kBisection; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::optional<Turn> wanted_change(const SimState& s, const VehicleState& v) {
  const Approach& ap = s.spec().topology.approaches[static_cast<std::size_t>(v.approach)];
  if (ap.lane_count < 2 || v.pos >= ap.lane_length || ap.lane_turns(v.lane).serves(v.turn)) return std::nullopt;
  int best = -1;
  for (int l = 0; l < ap.lane_count; ++l) {
    if (!ap.lane_turns(l).serves(v.turn)) continue;
    if (best < 0 || std::abs(l - v.lane) < std::abs(best - v.lane)) best = l;
  }
  if (best < 0) return std::nullopt;
  return best > v.lane ? Turn::left : Turn::right;
}

NeighborObs neighbor(const SimState& s, const VehicleState& ego, std::optional<VehicleId> id) {
  NeighborObs n;
  if (!id) return n;
  const VehicleState& o = s.vehicles.at(*id);
  const double dist = std::abs(o.pos - ego.pos);
  if (dist > kSensingCap) return n;
  n.present = true;
  n.speed = o.speed;
  n.distance = dist;
  n.turn_signal = wanted_change(s, o);
  return n;
}

double finite_or_unknown(double t) {
  return std::isfinite(t) ? t : kUnknownTime;
}

template <typename E>
void one_hot(FlatObservation& out, std::size_t& i, E value, int n) {
  for (int k = 0; k < n; ++k) out[i++] = static_cast<int>(value) == k ? 1.0 : 0.0;
}

}  // namespace

void RewardConfig::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("reward: eta must lie in [0, 1]");
  if (!(stop_threshold > 0.0)) throw ConfigError("reward: stop_threshold must be > 0");
  for (double w : {stop_penalty, emission_weight, comfort_w, jerk_w, ttc_w}) {
    if (!std::isfinite(w)) throw ConfigError("reward: weights must be finite");
  }
  if (!(ttc_cap > 0.0) || !std::isfinite(ttc_cap)) throw ConfigError("reward: ttc_cap must be positive");
}

RewardConfig RewardConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("reward: expected an object");
  RewardConfig c;
  const std::vector<std::pair<const char*, double*>> fields{
      {"eta", &c.eta},           {"stop_penalty", &c.stop_penalty}, {"emission_weight", &c.emission_weight},
      {"stop_threshold", &c.stop_threshold}, {"comfort_w", &c.comfort_w}, {"jerk_w", &c.jerk_w},
      {"ttc_w", &c.ttc_w},       {"ttc_cap", &c.ttc_cap}};
  for (const auto& [k, v] : j.items()) {
    const bool known = std::any_of(fields.begin(), fields.end(), [&k](const auto& f) { return k == f.first; });
    if (!known) throw ConfigError("reward: unknown key '" + k + "'");
    if (!v.is_number()) throw ConfigError("reward: '" + k + "' must be a number");
  }
  for (const auto& [key, dst] : fields) {
    if (j.contains(key)) *dst = j.at(key).get<double>();
  }
  c.validate();
  return c;
}

json RewardConfig::to_json() const {
  return {{"eta", eta},         {"stop_penalty", stop_penalty}, {"emission_weight", emission_weight},
          {"stop_threshold", stop_threshold}, {"comfort_w", comfort_w}, {"jerk_w", jerk_w},
          {"ttc_w", ttc_w},     {"ttc_cap", ttc_cap}};
}

std::array<double, kRewardDim> flatten(const RewardBreakdown& r) {
  return {r.velocity, r.stop, r.emission, r.ego, r.fleet, r.comfort, r.jerk_raw, r.jerk_rate, r.jerk, r.fleet_ttc, r.total};
}

const std::vector<std::string>& reward_field_names() {
  static const std::vector<std::string> names{"velocity", "stop",      "emission", "ego",       "fleet", "comfort",
                                              "jerk_raw", "jerk_rate", "jerk",     "fleet_ttc", "total"};
  return names;
}

double comfort_term(double accel) {
  return std::abs(accel);
}

double jerk_term(double accel, double accel_prev, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("jerk_term: dt must be positive");
  return std::abs(accel - accel_prev) / dt;
}

double fleet_ttc_term(double fleet_min_ttc, double cap) {
  return std::min(fleet_min_ttc, cap);
}

std::map<VehicleId, RewardBreakdown> compute_rewards(const std::vector<FleetEntry>& fleet,
                                                     const std::vector<VehicleId>& agents, double fleet_min_ttc,
                                                     double dt, const RewardConfig& cfg) {
  if (fleet.empty()) throw InvalidInput("reward: empty fleet");
  auto ego_term = [&cfg](const FleetEntry& f) {
    return f.speed + (f.speed < cfg.stop_threshold ? cfg.stop_penalty : 0.0) + cfg.emission_weight * f.emission_g;
  };
  double sum = 0.0, sum_abs_a = 0.0, sum_jerk = 0.0;
  for (const FleetEntry& f : fleet) {
    sum += ego_term(f);
    sum_abs_a += comfort_term(f.accel);
    sum_jerk += jerk_term(f.accel, f.accel_prev, dt);
  }
  const double n = static_cast<double>(fleet.size());
  const double fleet_mean = sum / n;
  const double ttc_value = cfg.ttc_w * fleet_ttc_term(fleet_min_ttc, cfg.ttc_cap);

  std::map<VehicleId, RewardBreakdown> out;
  for (VehicleId id : agents) {
    const auto it = std::find_if(fleet.begin(), fleet.end(), [id](const FleetEntry& f) { return f.id == id; });
    if (it == fleet.end()) throw InvalidInput("reward: agent " + std::to_string(id) + " is not in the fleet");
    RewardBreakdown r;
    r.velocity = it->speed;
    r.stop = it->speed < cfg.stop_threshold ? cfg.stop_penalty : 0.0;
    r.emission = cfg.emission_weight * it->emission_g;
    r.ego = r.velocity + r.stop + r.emission;
    r.fleet = fleet_mean;
    r.comfort = -cfg.comfort_w * (cfg.eta * sum_abs_a / n + (1.0 - cfg.eta) * comfort_term(it->accel));
    r.jerk_raw = std::abs(it->accel - it->accel_prev);
    r.jerk_rate = jerk_term(it->accel, it->accel_prev, dt);
    r.jerk = -cfg.jerk_w * (cfg.eta * sum_jerk / n + (1.0 - cfg.eta) * r.jerk_rate);
    r.fleet_ttc = ttc_value;
    r.total = cfg.eta * r.fleet + (1.0 - cfg.eta) * r.ego + r.comfort + r.jerk + r.fleet_ttc;
    out.emplace(id, r);
  }
  return out;
}

double safe_acceleration(const SafetyContext& ctx) {
  const double b = -ctx.bounds.min;
  double a = kInf;
  for (const SafetyObstacle& o : ctx.obstacles) {
    a = std::min(a, one_step_bound(ctx.speed, ctx.dt, o));
    a = std::min(a, stopping_bound(ctx.speed, ctx.dt, b, ctx.bounds.max, o));
  }
  return a;
}

std::pair<double, double> safe_interval(const SafetyContext& ctx) {
  const double a_safe = safe_acceleration(ctx);
  if (!ctx.reference) return {ctx.bounds.min, std::max(std::min(ctx.bounds.max, a_safe), ctx.bounds.min)};
  const double r = *ctx.reference;
  return {std::min(r, std::max(ctx.bounds.min, -ctx.comfort_decel)), std::min(ctx.bounds.max, std::max(a_safe, r))};
}

double safety_clamp(double proposed, const SafetyContext& ctx) {
  const auto [lo, hi] = safe_interval(ctx);
  return std::max(std::min(proposed, hi), lo);
}

SafetyContext safety_context(const SimState& s, const VehicleState& v) {
  SafetyContext ctx;
  ctx.speed = v.speed;
  ctx.dt = s.config.dt;
  ctx.bounds = s.config.accel_bounds;
  const Surroundings env = surroundings(s, v);
  if (env.vehicle) {
    const VehicleState& lead = s.vehicles.at(*env.vehicle->id);
    ctx.obstacles.push_back({env.vehicle->gap, env.vehicle->speed, lead.idm.decel_comf, v.idm.gap_min});
  }
  if (env.stop_line) ctx.obstacles.push_back({env.stop_line->gap, 0.0, 0.0, 0.0});
  ctx.reference = human_acceleration(s, v);
  ctx.comfort_decel = v.idm.decel_comf;
  return ctx;
}

const std::vector<LayoutField>& observation_layout() {
  static const std::vector<LayoutField> layout = [] {
    std::vector<LayoutField> f;
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t width) {
      f.push_back({std::move(name), off, width});
      off += width;
    };
    add("ego.speed", 1);
    add("ego.distance_to_signal", 1);
    add("ego.signal_state[green,yellow,red]", 3);
    add("ego.phase_time_remaining", 1);
    add("ego.next_green_2nd_cycle", 1);
    add("ego.next_green_3rd_cycle", 1);
    add("ego.location[approaching,at,exiting]", 3);
    add("ego.lane_index", 1);
    add("ego.turn_intention[left,straight,right]", 3);
    for (const char* slot : {"same_leader", "same_follower", "left_leader", "left_follower", "right_leader", "right_follower"}) {
      const std::string p = std::string("neighbor.") + slot + ".";
      add(p + "present", 1);
      add(p + "speed", 1);
      add(p + "relative_distance", 1);
      add(p + "turn_signal[left,right,none]", 3);
    }
    add("context.adoption_level", 1);
    add("context.phase_green_s", 1);
    add("context.phase_yellow_s", 1);
    add("context.phase_red_s", 1);
    add("context.temperature", 1);
    add("context.humidity", 1);
    add("context.is_ev", 1);
    add("context.lane_count", 1);
    add("context.lane_length", 1);
    add("context.speed_limit", 1);
    return f;
  }();
  return layout;
}

FlatObservation flatten(const Observation& o) {
  FlatObservation out{};
  std::size_t i = 0;
  out[i++] = o.speed;
  out[i++] = o.distance_to_signal;
  one_hot(out, i, o.signal, 3);
  out[i++] = o.phase_time_remaining;
  out[i++] = o.next_green_2nd;
  out[i++] = o.next_green_3rd;
  one_hot(out, i, o.location, 3);
  out[i++] = o.lane_index;
  one_hot(out, i, o.turn, 3);
  for (const NeighborObs& n : o.neighbors) {
    out[i++] = n.present ? 1.0 : 0.0;
    out[i++] = n.speed;
    out[i++] = n.distance;
    out[i++] = n.turn_signal == Turn::left ? 1.0 : 0.0;
    out[i++] = n.turn_signal == Turn::right ? 1.0 : 0.0;
    out[i++] = n.turn_signal ? 0.0 : 1.0;
  }
  out[i++] = o.adoption_level;
  out[i++] = o.phase_green_s;
  out[i++] = o.phase_yellow_s;
  out[i++] = o.phase_red_s;
  out[i++] = o.temperature;
  out[i++] = o.humidity;
  out[i++] = o.is_ev ? 1.0 : 0.0;
  out[i++] = o.lane_count;
  out[i++] = o.lane_length;
  out[i++] = o.speed_limit;
  return out;
}

Observation observe(const SimState& s, const ContextVector& ctx, const VehicleState& v) {
  const ScenarioSpec& spec = s.spec();
  const Approach& ap = spec.topology.approaches[static_cast<std::size_t>(v.approach)];
  Observation o;
  o.speed = v.speed;
  o.distance_to_signal = stop_line_distance(s, v);
  o.signal = s.colors[static_cast<std::size_t>(v.approach)];
  o.phase_time_remaining = finite_or_unknown(spec.plan.time_in_state_remaining(v.approach, s.clock));
  o.next_green_2nd = finite_or_unknown(spec.plan.time_to_green(v.approach, s.clock, 2));
  o.next_green_3rd = finite_or_unknown(spec.plan.time_to_green(v.approach, s.clock, 3));
  if (v.pos < ap.lane_length) {
    o.location = Location::approaching;
  } else if (v.pos < ap.lane_length + spec.topology.internal.box_length) {
    o.location = Location::at;
  } else {
    o.location = Location::exiting;
  }
  o.lane_index = v.lane;
  o.turn = v.turn;

  const auto& lane = s.lanes[static_cast<std::size_t>(v.approach)][static_cast<std::size_t>(v.lane)];
  const auto it = std::find(lane.begin(), lane.end(), v.id);
  const auto i = static_cast<std::size_t>(it - lane.begin());
  o.neighbors[0] = neighbor(s, v, i > 0 ? std::optional<VehicleId>(lane[i - 1]) : std::nullopt);
  o.neighbors[1] = neighbor(s, v, i + 1 < lane.size() ? std::optional<VehicleId>(lane[i + 1]) : std::nullopt);
  const int left = v.lane + 1;
  const int right = v.lane - 1;
  if (left < ap.lane_count) {
    o.neighbors[2] = neighbor(s, v, lane_leader_at(s, v.approach, left, v.pos));
    o.neighbors[3] = neighbor(s, v, lane_follower_at(s, v.approach, left, v.pos));
  }
  if (right >= 0) {
    o.neighbors[4] = neighbor(s, v, lane_leader_at(s, v.approach, right, v.pos));
    o.neighbors[5] = neighbor(s, v, lane_follower_at(s, v.approach, right, v.pos));
  }

  const ApproachTiming t = spec.plan.timing(v.approach);
  o.adoption_level = ctx.adoption_level;
  o.phase_green_s = t.green_s;
  o.phase_yellow_s = t.yellow_s;
  o.phase_red_s = t.red_s;
  o.temperature = ctx.temperature;
  o.humidity = ctx.humidity;
  o.is_ev = v.fuel == FuelType::ev;
  o.lane_count = ap.lane_count;
  o.lane_length = ap.lane_length;
  o.speed_limit = ap.speed_limit;
  return o;
}

void EpisodeSpec::validate() const {
  context.validate();
  sim.validate();
  reward.validate();
  coefficients.validate();
}

EpisodeSpec episode_spec_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("episode: expected an object");
  static const std::set<std::string> known{"format", "version", "context", "dataset", "index", "dt", "horizon", "warmup",
                                           "accel_bounds", "reward", "emission_coefficients", "controller", "seed",
                                           "adoption_level"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("episode: unknown key '" + k + "'");
  }
  if (j.value("format", "") != "intersim-episode") throw ConfigError("episode: format must be 'intersim-episode'");
  if (!j.contains("version") || j.at("version") != 1) throw ConfigError("episode: unsupported version");

  auto number = [&j](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(std::string("episode: '") + key + "' must be a number");
    return j.at(key).get<double>();
  };
  auto integer = [&j](const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError(std::string("episode: '") + key + "' must be an integer");
    return j.at(key).get<int>();
  };

  EpisodeSpec e;
  if (j.contains("context") == j.contains("dataset")) throw ConfigError("episode: give exactly one of 'context' or 'dataset'");
  if (j.contains("context")) {
    e.context = context_from_json(j.at("context"), 1);
  } else {
    if (!j.at("dataset").is_string()) throw ConfigError("episode: 'dataset' must be a path");
    const auto contexts = load_dataset(base / j.at("dataset").get<std::string>());
    const int index = integer("index", 0);
    if (index < 0 || index >= static_cast<int>(contexts.size()))
      throw ConfigError("episode: dataset index " + std::to_string(index) + " out of range");
    e.context = contexts[static_cast<std::size_t>(index)];
  }
  if (j.contains("adoption_level")) e.context.adoption_level = number("adoption_level", 0.0);
  e.sim.dt = number("dt", e.sim.dt);
  e.sim.horizon = integer("horizon", e.sim.horizon);
  e.sim.warmup = integer("warmup", e.sim.warmup);
  if (j.contains("accel_bounds")) {
    const json& b = j.at("accel_bounds");
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
      throw ConfigError("episode: 'accel_bounds' must be [min, max]");
    e.sim.accel_bounds = {b[0].get<double>(), b[1].get<double>()};
  }
  e.sim.spawn_gate = spawn_gate_for(e.context);
  if (j.contains("reward")) e.reward = RewardConfig::from_json(j.at("reward"));
  if (j.contains("emission_coefficients")) {
    if (!j.at("emission_coefficients").is_string()) throw ConfigError("episode: 'emission_coefficients' must be a path");
    const CoefficientSet cs = load_coefficients(base / j.at("emission_coefficients").get<std::string>());
    e.coefficients = cs.coefficients;
    e.coefficients_sha256 = cs.sha256;
  } else {
    e.coefficients_sha256 = default_coefficient_set().sha256;
  }
  if (j.contains("controller")) {
    if (!j.at("controller").is_string()) throw ConfigError("episode: 'controller' must be a string");
    e.controller = j.at("controller").get<std::string>();
  }
  if (j.contains("seed")) {
    const json& seed = j.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
      throw ConfigError("episode: 'seed' must be a non-negative integer");
    e.seed = j.at("seed").get<std::uint64_t>();
  }
  e.validate();
  return e;
}

EpisodeSpec load_episode_spec(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return episode_spec_from_json(j, path.parent_path());
}

double sample_emission_g(const VehicleSample& s, const ContextVector& ctx, const EmissionCoefficients& c, double dt) {
  return co2_rate(s.speed, s.accel, emission_context(ctx, s.approach, s.vclass, s.fuel, s.age_band), c) * dt;
}

Environment::Environment(EpisodeSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  scenario_ = std::make_shared<const ScenarioSpec>(make_scenario(spec_.context, spec_.drivers));
}

ObservationMap Environment::reset() {
  state_.emplace(make_state(scenario_, spec_.sim, spec_.seed));
  steps_ = 0;
  throughput_ = 0;
  for (int k = 0; k < spec_.sim.warmup; ++k) run_step({});
  activate_adoption(*state_);
  prepare_step(*state_);
  return observations();
}

StepEvents Environment::run_step(const AccelMap& accels) {
  prepare_step(*state_);
  if (!sink_) return complete_step(*state_, accels);
  std::vector<TraceRow> rows = trace_snapshot(*state_);
  StepEvents ev = complete_step(*state_, accels);
  attach_accels(rows, ev);
  sink_(rows);
  return ev;
}

std::vector<VehicleId> Environment::agents() const {
  std::vector<VehicleId> out;
  if (!state_) return out;
  for (const auto& [id, v] : state_->vehicles) {
    if (v.controlled) out.push_back(id);
  }
  return out;
}

ObservationMap Environment::observations() const {
  ObservationMap out;
  if (!state_) return out;
  for (VehicleId id : agents()) out.emplace(id, observe(*state_, spec_.context, state_->vehicles.at(id)));
  return out;
}

StepResult Environment::step(const AccelMap& actions) {
  if (!state_) throw InvalidInput("step called before reset");
  if (done()) throw InvalidInput("step called after the episode ended");
  SimState& s = *state_;
  prepare_step(s);

  StepResult r;
  for (const auto& [id, a] : actions) {
    const auto it = s.vehicles.find(id);
    if (it == s.vehicles.end()) throw InvalidInput("action for unknown vehicle id " + std::to_string(id));
    if (!it->second.controlled) r.info.warnings.push_back("ignored action for human-driven vehicle " + std::to_string(id));
    if (!std::isfinite(a)) throw InvalidInput("non-finite action for vehicle " + std::to_string(id));
  }
  const std::vector<VehicleId> live = agents();
  AccelMap realized;
  for (VehicleId id : live) {
    const auto it = actions.find(id);
    if (it == actions.end()) throw InvalidInput("missing action for controlled vehicle " + std::to_string(id));
    realized[id] = safety_clamp(it->second, safety_context(s, s.vehicles.at(id)));
  }

  r.events = run_step(realized);
  ++steps_;
  r.info.realized = realized;
  r.info.min_ttc = fleet_min_ttc(s);
  for (const ExitRecord& e : r.events.exited) r.info.exited.push_back(e.id);
  throughput_ += r.events.exited.size();
  r.info.throughput = throughput_;

  std::vector<FleetEntry> fleet;
  fleet.reserve(r.events.samples.size());
  for (const VehicleSample& v : r.events.samples) {
    const double e = sample_emission_g(v, spec_.context, spec_.coefficients, spec_.sim.dt);
    r.info.fleet_emission_g += e;
    fleet.push_back({v.id, v.speed, e, v.accel, v.accel_prev});
  }
  if (!live.empty()) r.rewards = compute_rewards(fleet, live, r.info.min_ttc, spec_.sim.dt, spec_.reward);

  r.done = done();
  if (!r.done) {
    prepare_step(s);
    r.observations = observations();
  }
  return r;
}

}  // namespace intersim
