#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "intersim/common.hpp"

namespace intersim {

/// Bitmask of turn movements a lane serves.
struct TurnSet {
  std::uint8_t bits = 0;

  static TurnSet of(std::initializer_list<Turn> turns);
  static TurnSet all() { return of({Turn::left, Turn::straight, Turn::right}); }

  bool serves(Turn t) const { return (bits >> static_cast<int>(t)) & 1U; }
  void add(Turn t) { bits = static_cast<std::uint8_t>(bits | (1U << static_cast<int>(t))); }
  bool empty() const { return bits == 0; }
  bool operator==(const TurnSet&) const = default;
};

/// One incoming road. Lane 0 is the rightmost lane.
struct Approach {
  int lane_count = 1;
  double lane_length = 200.0;  // m, lane start to stop line
  double speed_limit = 15.0;   // m/s
  double road_grade = 0.0;     // percent
  std::vector<TurnSet> turn_lanes;  // empty -> default_turn_lanes(lane_count)

  TurnSet lane_turns(int lane) const;
  bool operator==(const Approach&) const = default;
};

/// Rightmost lane adds right turns, leftmost adds left turns, all lanes serve
/// straight; a single lane serves everything.
std::vector<TurnSet> default_turn_lanes(int lane_count);

/// Downstream geometry shared by all approaches: vehicles cross a box of
/// box_length after the stop line, then drive exit_length before leaving.
struct InternalConnections {
  double box_length = 20.0;
  double exit_length = 80.0;
  bool operator==(const InternalConnections&) const = default;
};

struct IntersectionTopology {
  std::vector<Approach> approaches;
  InternalConnections internal;
  /// phase_membership[a] lists the phase indices that serve approach a.
  std::vector<std::vector<int>> phase_membership;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  bool operator==(const IntersectionTopology&) const = default;
};

struct Phase {
  double green_s = 30.0;
  double yellow_s = 3.0;
  double red_clearance_s = 2.0;
  std::vector<int> served_approaches;

  double duration() const { return green_s + yellow_s + red_clearance_s; }
  bool serves(int approach) const;
  bool operator==(const Phase&) const = default;
};

struct PhaseClock {
  int index = 0;
  double elapsed = 0.0;
};

/// Per-approach totals over one cycle.
struct ApproachTiming {
  double green_s = 0.0;
  double yellow_s = 0.0;
  double red_s = 0.0;
};

/// Fixed-time plan. Local cycle time is (clock - offset) mod cycle; phase 0
/// starts at local time 0.
struct SignalPlan {
  std::vector<Phase> phases;
  double offset_s = 0.0;

  double cycle() const;

  /// Throws ConfigError unless durations are sane, offset is in [0, cycle),
  /// and every approach in [0, approach_count) is served by some phase.
  void validate(int approach_count) const;

  double local_time(double clock) const;
  PhaseClock phase_at(double clock) const;
  SignalColor color(int approach, double clock) const;

  /// Time until the approach's colour changes, merging contiguous intervals of
  /// the same colour (so during red this is the time to the next green).
  double time_in_state_remaining(int approach, double clock) const;

  /// Time until the k-th green onset strictly after `clock` (k >= 1).
  /// Infinite if the approach is never green.
  double time_to_green(int approach, double clock, int k) const;

  ApproachTiming timing(int approach) const;

  bool operator==(const SignalPlan&) const = default;
};

/// Phase memberships implied by the plan's served_approaches lists.
std::vector<std::vector<int>> membership_from_plan(const SignalPlan& plan, int approach_count);

/// Checks that the topology's membership lists match the plan exactly.
void validate_pairing(const IntersectionTopology& topology, const SignalPlan& plan);

/// Virtual upstream signal that meters arrivals: arrivals queue while it is red.
struct SpawnGate {
  double cycle_s = 60.0;
  double green_s = 30.0;
  double offset_s = 0.0;

  bool is_green(double clock) const;
  void validate() const;
  bool operator==(const SpawnGate&) const = default;
};

}  // namespace intersim
