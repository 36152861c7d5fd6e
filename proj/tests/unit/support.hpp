#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "intersim/context.hpp"
#include "intersim/sim.hpp"

namespace intersim::test {

inline std::filesystem::path data_dir() { return std::filesystem::path(INTERSIM_SOURCE_DIR) / "data"; }

/// One approach that is always green, no arrivals.
inline ContextVector open_road(double length = 3000.0, double limit = 20.0, int lanes = 1) {
  ContextVector c;
  c.id = "open-road";
  c.seed = 7;
  c.approaches = {ApproachContext{lanes, length, limit, 0.0, 0.0}};
  c.phases = {PhaseContext{30.0, 0.0, 0.0, {0}}};
  return c;
}

/// Approach 0 is red for the first `red_s` seconds (approach 1 holds the green).
inline ContextVector red_light(double red_s = 200.0, double length = 400.0, double limit = 15.0) {
  ContextVector c;
  c.id = "red-light";
  c.seed = 11;
  c.approaches = {ApproachContext{1, length, limit, 0.0, 0.0}, ApproachContext{1, length, limit, 0.0, 0.0}};
  c.phases = {PhaseContext{red_s, 0.0, 0.0, {1}}, PhaseContext{30.0, 3.0, 2.0, {0}}};
  return c;
}

inline SimState scripted_state(const ContextVector& ctx, SimConfig cfg = {}, std::uint64_t seed = 1) {
  return make_state(std::make_shared<const ScenarioSpec>(make_scenario(ctx)), cfg, seed);
}

inline VehicleState car(double pos, double speed, IdmParams p = {}, int lane = 0, int approach = 0) {
  VehicleState v;
  v.approach = approach;
  v.lane = lane;
  v.pos = pos;
  v.speed = speed;
  v.idm = p;
  v.length = vehicle_length(VehicleClass::car);
  return v;
}

inline ContextVector reference_context() {
  return load_dataset(data_dir() / "reference_single_lane.jsonl").at(0);
}

}  // namespace intersim::test
