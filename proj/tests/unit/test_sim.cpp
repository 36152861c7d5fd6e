#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "intersim/context.hpp"
#include "intersim/sim.hpp"
#include "support.hpp"

namespace intersim {
namespace {

using test::car;
using test::open_road;
using test::red_light;
using test::scripted_state;

void expect_invariants(const SimState& s) {
  ASSERT_EQ(s.spawned, s.exited + s.vehicles.size());
  for (const auto& per_approach : s.lanes) {
    for (const auto& lane : per_approach) {
      for (std::size_t i = 0; i < lane.size(); ++i) {
        const VehicleState& v = s.vehicles.at(lane[i]);
        ASSERT_GE(v.speed, 0.0);
        if (i > 0) {
          ASSERT_GE(bumper_gap(s.vehicles.at(lane[i - 1]), v), 0.0);
        }
      }
    }
  }
}

TEST(Kernel, EmptyStateOnlyAdvancesClock) {
  SimState s = scripted_state(open_road());
  for (int i = 0; i < 10; ++i) {
    const StepEvents ev = advance(s, {});
    EXPECT_TRUE(ev.samples.empty());
  }
  EXPECT_EQ(s.step, 10);
  EXPECT_DOUBLE_EQ(s.clock, 5.0);
  EXPECT_EQ(s.spawned, 0u);
  EXPECT_EQ(s.exited, 0u);
}

TEST(Kernel, FreeFlowReachesDesiredSpeed) {
  IdmParams p;
  p.v_desired = 25.0;
  SimState s = scripted_state(open_road(20000.0, 17.0));
  const VehicleId id = insert_vehicle(s, car(0.0, 3.0, p));
  for (int i = 0; i < 400; ++i) advance(s, {});
  EXPECT_NEAR(s.vehicle(id).speed, 17.0, 1e-3);
}

TEST(Kernel, StopsAtRedLine) {
  IdmParams p;
  p.v_desired = 15.0;
  SimState s = scripted_state(red_light());
  const VehicleId id = insert_vehicle(s, car(300.0, 15.0, p));
  for (int i = 0; i < 200; ++i) advance(s, {});
  const VehicleState& v = s.vehicle(id);
  const double gap = stop_line_distance(s, v);
  EXPECT_LT(v.speed, 1e-3);
  EXPECT_GE(gap, 0.0);
  EXPECT_LE(gap, p.gap_min + 1.0);
}

TEST(Kernel, StopLineIgnoredOnGreen) {
  SimState s = scripted_state(open_road(400.0, 15.0));
  const VehicleId id = insert_vehicle(s, car(300.0, 15.0));
  prepare_step(s);
  EXPECT_FALSE(surroundings(s, s.vehicle(id)).stop_line.has_value());
}

TEST(Kernel, MatchesScalarIdmForTwoVehicles) {
  IdmParams lead_p, fol_p;
  lead_p.v_desired = 12.0;
  fol_p.v_desired = 16.0;
  fol_p.headway_time = 1.2;
  SimState s = scripted_state(open_road(5000.0, 20.0));
  const VehicleId lead = insert_vehicle(s, car(60.0, 8.0, lead_p));
  const VehicleId fol = insert_vehicle(s, car(20.0, 14.0, fol_p));
  double xl = 60.0, vl = 8.0, xf = 20.0, vf = 14.0;
  const double len = vehicle_length(VehicleClass::car);
  for (int k = 0; k < 200; ++k) {
    const double al = idm_acceleration(vl, kInf, 0.0, lead_p);
    const double af = idm_acceleration(vf, xl - len - xf, vf - vl, fol_p);
    const double vl2 = std::max(0.0, vl + al * 0.5);
    const double vf2 = std::max(0.0, vf + af * 0.5);
    xl += 0.5 * (vl + vl2) * 0.5;
    xf += 0.5 * (vf + vf2) * 0.5;
    vl = vl2;
    vf = vf2;
    advance(s, {});
    ASSERT_NEAR(s.vehicle(lead).pos, xl, 1e-9);
    ASSERT_NEAR(s.vehicle(fol).pos, xf, 1e-9);
    ASSERT_NEAR(s.vehicle(fol).speed, vf, 1e-9);
  }
}

TEST(Kernel, PlatoonSettles) {
  IdmParams leader;
  leader.v_desired = 10.0;
  IdmParams follower;
  follower.v_desired = 15.0;
  SimState s = scripted_state(open_road(20000.0, 20.0));
  insert_vehicle(s, car(500.0, 10.0, leader));
  for (int i = 1; i <= 10; ++i) insert_vehicle(s, car(500.0 - 30.0 * i, 10.0, follower));
  for (int k = 0; k < 1000; ++k) advance(s, {});
  for (const auto& [id, v] : s.vehicles) EXPECT_LT(std::abs(v.accel), 1e-3) << id;
}

TEST(Kernel, InsertRejectsOverlapAndBadLane) {
  SimState s = scripted_state(open_road());
  insert_vehicle(s, car(100.0, 0.0));
  EXPECT_THROW(insert_vehicle(s, car(97.0, 0.0)), InvalidInput);
  EXPECT_THROW(insert_vehicle(s, car(103.0, 0.0)), InvalidInput);
  EXPECT_THROW(insert_vehicle(s, car(50.0, 0.0, {}, 1)), InvalidInput);
  EXPECT_THROW(insert_vehicle(s, car(-1.0, 0.0)), InvalidInput);
  EXPECT_EQ(s.vehicles.size(), 1u);
}

TEST(Kernel, CollisionIsAFault) {
  SimState s = scripted_state(open_road());
  insert_vehicle(s, car(100.0, 0.0));
  VehicleState cv = car(90.0, 10.0);
  cv.controlled = true;
  const VehicleId id = insert_vehicle(s, cv);
  try {
    for (int i = 0; i < 10; ++i) advance(s, {{id, 3.0}});
    FAIL() << "expected a collision";
  } catch (const CollisionFault& f) {
    EXPECT_EQ(f.follower(), id);
    EXPECT_LT(f.gap(), 0.0);
  }
}

TEST(Kernel, MissingCvActionThrows) {
  SimState s = scripted_state(open_road());
  VehicleState cv = car(10.0, 5.0);
  cv.controlled = true;
  insert_vehicle(s, cv);
  EXPECT_THROW(advance(s, {}), InvalidInput);
}

TEST(Arrivals, PoissonMeans) {
  Rng zero = make_stream(1, "arrivals");
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(draw_arrival_count(0.0, 0.5, zero), 0);

  auto check = [](double vph, int steps, std::uint64_t seed) {
    Rng rng = make_stream(seed, "arrivals");
    const double lambda = vph * 0.5 / 3600.0;
    double sum = 0.0;
    for (int i = 0; i < steps; ++i) sum += draw_arrival_count(vph, 0.5, rng);
    const double mean = sum / steps;
    EXPECT_LE(std::abs(mean - lambda), 3.0 * std::sqrt(lambda / steps)) << vph;
  };
  check(360.0, 200000, 3);
  check(600.0, 7200, 4);
}

TEST(Arrivals, SpawnSpeedRespectsLimitAndLeader) {
  ContextVector c = open_road(500.0, 14.0);
  c.approaches[0].inflow_vph = 2000.0;
  SimState s = scripted_state(c);
  for (int k = 0; k < 400; ++k) {
    const StepEvents ev = advance(s, {});
    for (VehicleId id : ev.spawned) {
      const VehicleState& v = s.vehicle(id);
      EXPECT_EQ(v.pos, 0.0);
      EXPECT_LE(v.speed, 14.0);
    }
    expect_invariants(s);
  }
  EXPECT_GT(s.spawned, 50u);
}

TEST(Arrivals, GateQueuesWhileRed) {
  ContextVector c = open_road(500.0, 14.0);
  c.approaches[0].inflow_vph = 1500.0;
  SimConfig cfg;
  cfg.spawn_gate = SpawnGate{60.0, 30.0, 0.0};
  SimState s = scripted_state(c, cfg);
  for (int k = 0; k < 240; ++k) {
    const double clock = s.clock;
    const StepEvents ev = advance(s, {});
    if (!cfg.spawn_gate->is_green(clock)) {
      EXPECT_TRUE(ev.spawned.empty()) << clock;
    }
  }
  EXPECT_GT(s.spawned, 0u);
  EXPECT_EQ(s.arrived, s.spawned + s.pending_count());
}

TEST(LaneChange, SingleLaneNeverChanges) {
  SimState s = scripted_state(open_road(400.0, 15.0, 1));
  VehicleState v = car(50.0, 10.0);
  v.turn = Turn::left;
  insert_vehicle(s, v);
  EXPECT_TRUE(lane_change_step(s).empty());
}

TEST(LaneChange, LeftTurnerMovesLeft) {
  SimState s = scripted_state(open_road(400.0, 15.0, 2));
  VehicleState v = car(50.0, 10.0, {}, 0);
  v.turn = Turn::left;
  const VehicleId id = insert_vehicle(s, v);
  const auto events = lane_change_step(s);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].id, id);
  EXPECT_EQ(events[0].from_lane, 0);
  EXPECT_EQ(events[0].to_lane, 1);
  EXPECT_EQ(s.vehicle(id).lane, 1);
  EXPECT_TRUE(lane_change_step(s).empty());
}

TEST(LaneChange, ServingLaneStays) {
  SimState s = scripted_state(open_road(400.0, 15.0, 2));
  VehicleState v = car(50.0, 10.0, {}, 0);
  v.turn = Turn::straight;
  insert_vehicle(s, v);
  EXPECT_TRUE(lane_change_step(s).empty());
}

TEST(LaneChange, BlockedTargetRejects) {
  SimState s = scripted_state(open_road(400.0, 15.0, 2));
  insert_vehicle(s, car(54.0, 10.0, {}, 1));
  VehicleState v = car(50.0, 10.0, {}, 0);
  v.turn = Turn::left;
  insert_vehicle(s, v);
  EXPECT_TRUE(lane_change_step(s).empty());
}

TEST(Kernel, RandomScenariosKeepInvariants) {
  const FeatureDistribution procedural = load_distribution(test::data_dir() / "procedural.json");
  Rng rng = make_stream(99, "sim-test");
  for (int n = 0; n < 4; ++n) {
    const ContextVector ctx = sample_context(procedural, rng);
    SimState s = scripted_state(ctx, {}, 5);
    std::map<VehicleId, double> last_pos;
    for (int k = 0; k < 1000; ++k) {
      advance(s, {});
      expect_invariants(s);
      for (const auto& [id, v] : s.vehicles) {
        const auto it = last_pos.find(id);
        if (it != last_pos.end()) {
          ASSERT_GE(v.pos, it->second);
        }
        last_pos[id] = v.pos;
      }
    }
  }
}

TEST(Kernel, Deterministic) {
  const ContextVector ctx = test::reference_context();
  auto run = [&] {
    SimState s = scripted_state(ctx, {}, 17);
    std::vector<double> out;
    for (int k = 0; k < 600; ++k) {
      for (const VehicleSample& v : advance(s, {}).samples) {
        out.push_back(static_cast<double>(v.id));
        out.push_back(v.pos);
        out.push_back(v.speed);
      }
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Kernel, FleetMinTtc) {
  SimState s = scripted_state(open_road());
  EXPECT_EQ(fleet_min_ttc(s), kInf);
  insert_vehicle(s, car(100.0, 5.0));
  insert_vehicle(s, car(75.0, 10.0));
  EXPECT_DOUBLE_EQ(fleet_min_ttc(s), 4.0);
}

}  // namespace
}  // namespace intersim
