#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "intersim/sim.hpp"

namespace intersim {

/// One vehicle in one step, as seen at decision time (before the update);
/// accel is the acceleration applied during that step.
///
/// Column order: scenario_id, step, vehicle_id, approach, lane, class,
/// controlled, pos, speed, accel, signal, phase, decision, leader_id,
/// leader_gap, leader_speed. leader_id is empty and leader_gap is "inf" when
/// the lane ahead is empty.
struct TraceRow {
  std::string scenario_id;
  std::int64_t step = 0;
  VehicleId vehicle_id = 0;
  int approach = 0;
  int lane = 0;
  VehicleClass vclass = VehicleClass::car;
  bool controlled = false;
  double pos = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  SignalColor signal = SignalColor::red;
  int phase = 0;
  SignalDecision decision = SignalDecision::none;
  std::optional<VehicleId> leader_id;
  double leader_gap = kInf;
  double leader_speed = 0.0;

  bool operator==(const TraceRow&) const = default;
};

std::string_view to_string(SignalDecision d);

/// Rows for every present vehicle; call after prepare_step. accel is left at 0.
std::vector<TraceRow> trace_snapshot(const SimState& state);

/// Fills accel from the step's samples (matched by id).
void attach_accels(std::vector<TraceRow>& rows, const StepEvents& events);

class TraceWriter {
 public:
  TraceWriter(std::ostream& out, double dt);
  void write(const std::vector<TraceRow>& rows);

 private:
  std::ostream& out_;
};

struct Trace {
  double dt = 0.0;
  std::vector<TraceRow> rows;
};

/// Parses a trace file. Throws ParseError naming the line and column.
Trace read_trace(std::istream& in);

}  // namespace intersim
