#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "intersim/signal.hpp"
#include "intersim/sim.hpp"

namespace intersim {

/// Exhaustive fixed-time search space: every phase takes each value of
/// green_values independently; yellow and red clearance are fixed.
struct SignalSearchGrid {
  std::vector<double> green_values{20.0, 25.0, 30.0, 35.0};
  double yellow_s = 3.0;
  double red_clearance_s = 2.0;
  double offset_s = 0.0;
  double dt = 0.5;
  int sim_steps = 1200;
  int warmup_steps = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct CandidateAudit {
  std::size_t index = 0;
  std::vector<double> greens;  // per phase
  double cycle_s = 0.0;
  std::vector<double> approach_delay_s;  // mean delay per arriving vehicle
  double score = 0.0;                    // inflow-weighted mean delay
};

struct SignalSearchResult {
  SignalPlan plan;
  std::size_t winner = 0;
  std::vector<CandidateAudit> audit;

  nlohmann::json audit_json() const;
};

/// Phases and their served approaches follow topology.phase_membership.
/// Each candidate is scored by baseline (all-human) simulations of every
/// approach in isolation, with the approach's signal timeline rotated to start
/// at its first green and identical seeds for every candidate. Lowest score
/// wins; ties go to the shorter cycle, then to the lexicographically smaller
/// green vector. Candidates run on up to `workers` threads.
SignalSearchResult optimize_signal_plan(const IntersectionTopology& topology, const std::vector<double>& inflows_vph,
                                        const SignalSearchGrid& grid, unsigned workers = 1);

/// The winner's score is <= every other candidate's, and the plan matches it.
bool audit_certifies(const SignalSearchResult& result);

/// Isolated single-approach plan for one approach, rotated so that its first
/// green starts at local time 0.
SignalPlan rotated_approach_plan(const SignalPlan& plan, int approach);

}  // namespace intersim
