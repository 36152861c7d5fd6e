#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "intersim/env.hpp"
#include "support.hpp"

namespace intersim {
namespace {

using test::car;
using test::scripted_state;

std::vector<FleetEntry> random_fleet(Rng& rng, std::size_t n) {
  std::vector<FleetEntry> fleet;
  for (std::size_t i = 0; i < n; ++i) {
    fleet.push_back({i + 1, uniform_in(rng, 0.0, 18.0), uniform_in(rng, 0.0, 4.0), uniform_in(rng, -4.5, 3.0),
                     uniform_in(rng, -4.5, 3.0)});
  }
  return fleet;
}

std::vector<VehicleId> ids_of(const std::vector<FleetEntry>& fleet) {
  std::vector<VehicleId> ids;
  for (const FleetEntry& f : fleet) ids.push_back(f.id);
  return ids;
}

TEST(Reward, WorkedExample) {
  RewardConfig cfg;
  cfg.eta = 0.0;
  cfg.stop_penalty = -5.0;
  cfg.emission_weight = -0.5;
  cfg.stop_threshold = 1.0;
  const auto r = compute_rewards({{1, 10.0, 2.0, 0.0, 0.0}}, {1}, kInf, 0.5, cfg);
  const RewardBreakdown& b = r.at(1);
  EXPECT_DOUBLE_EQ(b.velocity, 10.0);
  EXPECT_EQ(b.stop, 0.0);
  EXPECT_DOUBLE_EQ(b.emission, -1.0);
  EXPECT_DOUBLE_EQ(b.total, 9.0);
}

TEST(Reward, StoppedVehiclePaysPenalty) {
  RewardConfig cfg;
  cfg.stop_penalty = -5.0;
  const auto r = compute_rewards({{1, 0.5, 0.0, 0.0, 0.0}}, {1}, kInf, 0.5, cfg);
  EXPECT_EQ(r.at(1).stop, -5.0);
}

TEST(Reward, SingleVehicleIgnoresEta) {
  Rng rng = make_stream(1, "reward");
  for (int k = 0; k < 200; ++k) {
    const auto fleet = random_fleet(rng, 1);
    RewardConfig cfg;
    cfg.comfort_w = 0.3;
    cfg.jerk_w = 0.1;
    cfg.eta = 0.0;
    const double t0 = compute_rewards(fleet, {1}, 5.0, 0.5, cfg).at(1).total;
    for (double eta : {0.25, 0.5, 1.0}) {
      cfg.eta = eta;
      EXPECT_NEAR(compute_rewards(fleet, {1}, 5.0, 0.5, cfg).at(1).total, t0, 1e-12);
    }
  }
}

TEST(Reward, EtaOneGivesFleetMean) {
  RewardConfig cfg;
  cfg.eta = 1.0;
  const std::vector<FleetEntry> fleet{{1, 12.0, 1.0, 0.5, 0.0}, {2, 0.2, 0.3, -1.0, 0.0}};
  const auto r = compute_rewards(fleet, {1, 2}, kInf, 0.5, cfg);
  EXPECT_DOUBLE_EQ(r.at(1).total, r.at(2).total);
  EXPECT_DOUBLE_EQ(r.at(1).total, r.at(1).fleet);
}

TEST(Reward, AffineInEta) {
  Rng rng = make_stream(2, "reward");
  for (int k = 0; k < 200; ++k) {
    const auto fleet = random_fleet(rng, 1 + static_cast<std::size_t>(k % 7));
    const auto ids = ids_of(fleet);
    RewardConfig cfg;
    cfg.comfort_w = uniform_in(rng, 0.0, 1.0);
    cfg.jerk_w = uniform_in(rng, 0.0, 1.0);
    cfg.ttc_w = uniform_in(rng, 0.0, 1.0);
    auto at = [&](double eta) {
      cfg.eta = eta;
      return compute_rewards(fleet, ids, 3.0, 0.5, cfg);
    };
    const auto r0 = at(0.0), r1 = at(1.0), rh = at(0.5);
    for (VehicleId id : ids) {
      const auto f0 = flatten(r0.at(id)), f1 = flatten(r1.at(id)), fh = flatten(rh.at(id));
      for (std::size_t i = 0; i < kRewardDim; ++i) EXPECT_NEAR(fh[i], 0.5 * (f0[i] + f1[i]), 1e-12) << i;
    }
  }
}

TEST(Reward, TotalDecomposes) {
  Rng rng = make_stream(3, "reward");
  RewardConfig cfg;
  cfg.eta = 0.3;
  cfg.comfort_w = 0.2;
  cfg.jerk_w = 0.05;
  cfg.ttc_w = 0.1;
  const auto fleet = random_fleet(rng, 6);
  for (const auto& [id, r] : compute_rewards(fleet, ids_of(fleet), 2.5, 0.5, cfg)) {
    EXPECT_NEAR(r.total, cfg.eta * r.fleet + (1.0 - cfg.eta) * r.ego + r.comfort + r.jerk + r.fleet_ttc, 1e-12);
    EXPECT_NEAR(r.ego, r.velocity + r.stop + r.emission, 1e-12);
    EXPECT_NEAR(r.fleet_ttc, 0.25, 1e-12);
  }
}

TEST(Reward, Errors) {
  EXPECT_THROW(compute_rewards({}, {}, kInf, 0.5, RewardConfig{}), InvalidInput);
  EXPECT_THROW(compute_rewards({{1, 1.0, 0.0, 0.0, 0.0}}, {2}, kInf, 0.5, RewardConfig{}), InvalidInput);
  RewardConfig bad;
  bad.eta = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(RewardConfig::from_json(nlohmann::json::parse(R"({"alpha":1})")), ConfigError);
  RewardConfig rt;
  rt.eta = 0.2;
  rt.jerk_w = 0.7;
  EXPECT_EQ(RewardConfig::from_json(rt.to_json()), rt);
}

TEST(RewardTerms, Examples) {
  EXPECT_EQ(comfort_term(0.0), 0.0);
  EXPECT_EQ(comfort_term(-2.0), 2.0);
  EXPECT_DOUBLE_EQ(jerk_term(1.0, -0.5, 0.5), 3.0);
  EXPECT_EQ(fleet_ttc_term(kInf, 20.0), 20.0);
  EXPECT_EQ(fleet_ttc_term(4.0, 20.0), 4.0);
  EXPECT_THROW(jerk_term(1.0, 0.0, 0.0), InvalidInput);
}

TEST(RewardLayout, NamesMatchFlatten) {
  const auto& names = reward_field_names();
  ASSERT_EQ(names.size(), kRewardDim);
  EXPECT_EQ(names.front(), "velocity");
  EXPECT_EQ(names.back(), "total");
  RewardBreakdown r;
  r.velocity = 1.0;
  r.total = 2.0;
  const auto flat = flatten(r);
  EXPECT_EQ(flat.front(), 1.0);
  EXPECT_EQ(flat.back(), 2.0);
}

SafetyContext stationary_leader(double speed, double gap) {
  SafetyContext ctx;
  ctx.speed = speed;
  ctx.dt = 0.5;
  ctx.obstacles.push_back({gap, 0.0, 2.0, 2.0});
  return ctx;
}

TEST(SafetyClamp, NoObstacleKeepsActionInBounds) {
  SafetyContext ctx;
  ctx.speed = 10.0;
  EXPECT_EQ(safety_clamp(1.2, ctx), 1.2);
  EXPECT_EQ(safety_clamp(-3.0, ctx), -3.0);
  EXPECT_EQ(safety_clamp(9.0, ctx), ctx.bounds.max);
  EXPECT_EQ(safety_clamp(-9.0, ctx), ctx.bounds.min);
}

TEST(SafetyClamp, StationaryLeaderForcesBraking) {
  const SafetyContext ctx = stationary_leader(15.0, 10.0);
  const double a = safety_clamp(1.0, ctx);
  EXPECT_EQ(a, -4.5);
  const double v_next = speed_update(15.0, a, 0.5);
  const double gap_next = 10.0 - step_displacement(15.0, v_next, 0.5);
  EXPECT_DOUBLE_EQ(gap_next, 3.0625);
  EXPECT_GE(gap_next, 2.0);
}

TEST(SafetyClamp, OneStepBoundHolds) {
  // a_safe keeps the next gap >= margin when the leader brakes at its comfortable rate.
  Rng rng = make_stream(4, "clamp");
  for (int k = 0; k < 2000; ++k) {
    SafetyContext ctx;
    ctx.speed = uniform_in(rng, 0.0, 20.0);
    const double vl = uniform_in(rng, 0.0, 20.0);
    ctx.obstacles.push_back({uniform_in(rng, 0.5, 80.0), vl, 2.0, 2.0});
    const double a_safe = safe_acceleration(ctx);
    if (!std::isfinite(a_safe) || a_safe < ctx.bounds.min) continue;
    const double a = std::min(a_safe, ctx.bounds.max);
    const double v_next = speed_update(ctx.speed, a, 0.5);
    const double lead = step_displacement(vl, speed_update(vl, -2.0, 0.5), 0.5);
    EXPECT_GE(ctx.obstacles[0].gap + lead - step_displacement(ctx.speed, v_next, 0.5), 2.0 - 1e-9);
  }
}

TEST(SafetyClamp, Idempotent) {
  Rng rng = make_stream(5, "clamp");
  for (int k = 0; k < 5000; ++k) {
    SafetyContext ctx = stationary_leader(uniform_in(rng, 0.0, 20.0), uniform_in(rng, 0.1, 60.0));
    ctx.obstacles[0].speed = uniform_in(rng, 0.0, 20.0);
    if (k % 2 == 0) {
      ctx.reference = uniform_in(rng, -4.5, 3.0);
      ctx.comfort_decel = 2.0;
    }
    const double x = uniform_in(rng, -10.0, 10.0);
    const double once = safety_clamp(x, ctx);
    EXPECT_EQ(safety_clamp(once, ctx), once);
    EXPECT_GE(once, ctx.bounds.min);
    EXPECT_LE(once, ctx.bounds.max);
  }
}

TEST(SafetyClamp, ReferenceIsNeverOverridden) {
  Rng rng = make_stream(6, "clamp");
  for (int k = 0; k < 5000; ++k) {
    SafetyContext ctx = stationary_leader(uniform_in(rng, 0.0, 20.0), uniform_in(rng, 0.1, 60.0));
    ctx.reference = uniform_in(rng, -4.5, 3.0);
    ctx.comfort_decel = 2.0;
    EXPECT_EQ(safety_clamp(*ctx.reference, ctx), *ctx.reference);
    const auto [lo, hi] = safe_interval(ctx);
    EXPECT_LE(lo, hi);
  }
}

TEST(SafetyClamp, CloseLeaderClampsHardAcceleration) {
  SimState s = scripted_state(test::open_road());
  insert_vehicle(s, car(107.0, 10.0));
  VehicleState cv = car(100.0, 10.0);
  cv.controlled = true;
  const VehicleId id = insert_vehicle(s, cv);
  prepare_step(s);
  const SafetyContext ctx = safety_context(s, s.vehicle(id));
  ASSERT_EQ(ctx.obstacles.size(), 1u);
  EXPECT_DOUBLE_EQ(ctx.obstacles[0].gap, 2.0);
  EXPECT_LT(safety_clamp(3.0, ctx), 3.0);
  EXPECT_EQ(safety_clamp(*ctx.reference, ctx), human_acceleration(s, s.vehicle(id)));
}

TEST(ObservationLayout, ContiguousAndComplete) {
  const auto& layout = observation_layout();
  std::size_t off = 0;
  std::set<std::string> names;
  for (const LayoutField& f : layout) {
    EXPECT_EQ(f.offset, off) << f.name;
    EXPECT_GE(f.width, 1u);
    EXPECT_TRUE(names.insert(f.name).second) << f.name;
    off += f.width;
  }
  EXPECT_EQ(off, kObservationDim);
}

std::size_t offset_of(const std::string& name) {
  for (const LayoutField& f : observation_layout()) {
    if (f.name == name) return f.offset;
  }
  ADD_FAILURE() << "no field " << name;
  return 0;
}

TEST(ObservationLayout, FlattenFollowsDescriptor) {
  Observation o;
  o.speed = 7.5;
  o.distance_to_signal = 42.0;
  o.signal = SignalColor::yellow;
  o.turn = Turn::right;
  o.neighbors[static_cast<std::size_t>(Slot::left_follower)] = {true, 3.0, 12.0, Turn::left};
  o.speed_limit = 16.0;
  o.is_ev = true;
  const FlatObservation f = flatten(o);
  EXPECT_EQ(f[offset_of("ego.speed")], 7.5);
  EXPECT_EQ(f[offset_of("ego.distance_to_signal")], 42.0);
  const std::size_t sig = offset_of("ego.signal_state[green,yellow,red]");
  EXPECT_EQ(f[sig], 0.0);
  EXPECT_EQ(f[sig + 1], 1.0);
  EXPECT_EQ(f[sig + 2], 0.0);
  EXPECT_EQ(f[offset_of("ego.turn_intention[left,straight,right]") + 2], 1.0);
  EXPECT_EQ(f[offset_of("neighbor.left_follower.present")], 1.0);
  EXPECT_EQ(f[offset_of("neighbor.left_follower.relative_distance")], 12.0);
  EXPECT_EQ(f[offset_of("neighbor.left_follower.turn_signal[left,right,none]")], 1.0);
  EXPECT_EQ(f[offset_of("neighbor.same_leader.present")], 0.0);
  EXPECT_EQ(f[offset_of("neighbor.same_leader.relative_distance")], kSensingCap);
  EXPECT_EQ(f[offset_of("neighbor.same_leader.turn_signal[left,right,none]") + 2], 1.0);
  EXPECT_EQ(f[offset_of("context.is_ev")], 1.0);
  EXPECT_EQ(f[offset_of("context.speed_limit")], 16.0);
}

TEST(Observe, NeighboursAndSignal) {
  SimState s = scripted_state(test::red_light(), {}, 1);
  insert_vehicle(s, car(300.0, 5.0));
  const VehicleId ego = insert_vehicle(s, car(250.0, 10.0));
  insert_vehicle(s, car(100.0, 10.0));
  prepare_step(s);
  const Observation o = observe(s, test::red_light(), s.vehicle(ego));
  EXPECT_EQ(o.signal, SignalColor::red);
  EXPECT_DOUBLE_EQ(o.distance_to_signal, 150.0);
  EXPECT_DOUBLE_EQ(o.phase_time_remaining, 200.0);
  EXPECT_DOUBLE_EQ(o.next_green_2nd, 200.0 + 35.0 + 200.0);
  const NeighborObs& lead = o.neighbors[static_cast<std::size_t>(Slot::same_leader)];
  EXPECT_TRUE(lead.present);
  EXPECT_DOUBLE_EQ(lead.distance, 50.0);
  EXPECT_DOUBLE_EQ(lead.speed, 5.0);
  EXPECT_FALSE(o.neighbors[static_cast<std::size_t>(Slot::same_follower)].present);  // beyond the cap
  EXPECT_FALSE(o.neighbors[static_cast<std::size_t>(Slot::left_leader)].present);
  EXPECT_EQ(o.lane_count, 1);
  EXPECT_DOUBLE_EQ(o.phase_green_s, 30.0);
  EXPECT_DOUBLE_EQ(o.phase_red_s, 202.0);
}

EpisodeSpec reference_spec(double adoption) {
  EpisodeSpec e;
  e.context = test::reference_context();
  e.context.adoption_level = adoption;
  e.sim.horizon = 200;
  e.seed = 9;
  return e;
}

TEST(Environment, NoAdoptionMeansNoAgents) {
  Environment env(reference_spec(0.0));
  EXPECT_TRUE(env.reset().empty());
  const StepResult r = env.step({});
  EXPECT_TRUE(r.rewards.empty());
  EXPECT_TRUE(r.observations.empty());
  EXPECT_GT(r.info.fleet_emission_g, 0.0);
}

TEST(Environment, ResetIsDeterministicAndRunsWarmup) {
  Environment a(reference_spec(1.0));
  Environment b(reference_spec(1.0));
  const ObservationMap oa = a.reset();
  const ObservationMap ob = b.reset();
  ASSERT_EQ(oa.size(), ob.size());
  ASSERT_FALSE(oa.empty());
  for (const auto& [id, o] : oa) EXPECT_EQ(flatten(o), flatten(ob.at(id)));
  EXPECT_DOUBLE_EQ(a.state().clock, 25.0);
  EXPECT_EQ(a.state().step, 50);
  a.reset();
  EXPECT_EQ(a.observations().size(), oa.size());
}

TEST(Environment, StepLifecycle) {
  Environment env(reference_spec(1.0));
  ObservationMap obs = env.reset();
  int steps = 0;
  while (!env.done()) {
    AccelMap actions;
    for (const auto& [id, o] : obs) actions[id] = human_acceleration(env.state(), env.state().vehicle(id));
    const StepResult r = env.step(actions);
    for (const auto& [id, a] : actions) EXPECT_EQ(r.info.realized.at(id), a);
    EXPECT_EQ(r.rewards.size(), actions.size());
    obs = r.observations;
    ++steps;
  }
  EXPECT_EQ(steps, 150);
  EXPECT_THROW(env.step({}), InvalidInput);
}

TEST(Environment, ActionErrors) {
  Environment env(reference_spec(0.0));
  EXPECT_THROW(env.step({}), InvalidInput);
  env.reset();
  EXPECT_THROW(env.step({{999999, 0.0}}), InvalidInput);
  ASSERT_FALSE(env.state().vehicles.empty());
  const VehicleId human = env.state().vehicles.begin()->first;
  const StepResult r = env.step({{human, 1.0}});
  ASSERT_EQ(r.info.warnings.size(), 1u);
  EXPECT_NE(r.info.warnings[0].find(std::to_string(human)), std::string::npos);
}

TEST(Environment, MissingAgentActionThrows) {
  Environment env(reference_spec(1.0));
  ASSERT_FALSE(env.reset().empty());
  EXPECT_THROW(env.step({}), InvalidInput);
}

TEST(EpisodeSpecFile, ParsesAndRejects) {
  const auto base = test::data_dir();
  const nlohmann::json j = {{"format", "intersim-episode"},
                            {"version", 1},
                            {"dataset", "reference_single_lane.jsonl"},
                            {"horizon", 400},
                            {"warmup", 40},
                            {"adoption_level", 0.5},
                            {"reward", {{"eta", 0.25}}},
                            {"emission_coefficients", "emission_coefficients.json"},
                            {"controller", "glide_to_green"},
                            {"seed", 3}};
  const EpisodeSpec e = episode_spec_from_json(j, base);
  EXPECT_EQ(e.sim.horizon, 400);
  EXPECT_EQ(e.sim.warmup, 40);
  EXPECT_EQ(e.context.adoption_level, 0.5);
  EXPECT_EQ(e.reward.eta, 0.25);
  EXPECT_EQ(e.controller, "glide_to_green");
  EXPECT_EQ(e.seed, 3u);
  EXPECT_EQ(e.coefficients_sha256, default_coefficient_set().sha256);

  nlohmann::json bad = j;
  bad["horizon_s"] = 10;
  EXPECT_THROW(episode_spec_from_json(bad, base), ConfigError);
  bad = j;
  bad["index"] = 4;
  EXPECT_THROW(episode_spec_from_json(bad, base), ConfigError);
  bad = j;
  bad["warmup"] = 500;
  EXPECT_THROW(episode_spec_from_json(bad, base), ConfigError);
}

}  // namespace
}  // namespace intersim
