#include "intersim/signal_opt.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace intersim {

namespace {

std::vector<std::vector<double>> candidate_greens(const std::vector<double>& values, int phases) {
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(phases), 0);
  while (true) {
    std::vector<double> g;
    for (std::size_t i : idx) g.push_back(values[i]);
    out.push_back(std::move(g));
    int k = phases - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == values.size()) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
  return out;
}

double approach_delay(const IntersectionTopology& topology, const SignalPlan& plan, int approach, double inflow,
                      const SignalSearchGrid& grid) {
  auto spec = std::make_shared<ScenarioSpec>();
  spec->id = "signal-opt";
  spec->topology.approaches = {topology.approaches[static_cast<std::size_t>(approach)]};
  spec->topology.internal = topology.internal;
  spec->plan = rotated_approach_plan(plan, approach);
  spec->topology.phase_membership = membership_from_plan(spec->plan, 1);
  spec->inflows_vph = {inflow};
  spec->arrival_seed = grid.seed;
  spec->driver_seed = grid.seed;
  spec->adoption_seed = grid.seed;

  SimConfig cfg;
  cfg.dt = grid.dt;
  cfg.horizon = grid.sim_steps;
  cfg.warmup = grid.warmup_steps;
  SimState s = make_state(spec, cfg, grid.seed);
  const double limit = spec->topology.approaches[0].speed_limit;
  double total = 0.0;
  std::size_t arrivals = 0;
  for (int k = 0; k < grid.sim_steps; ++k) {
    const StepEvents ev = advance(s, {});
    if (k < grid.warmup_steps) continue;
    arrivals += ev.arrivals;
    for (const VehicleSample& v : ev.samples) total += std::max(0.0, 1.0 - v.speed / limit) * grid.dt;
    total += static_cast<double>(s.pending_count()) * grid.dt;
  }
  return total / static_cast<double>(std::max<std::size_t>(arrivals, 1));
}

bool better(const CandidateAudit& a, const CandidateAudit& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.cycle_s != b.cycle_s) return a.cycle_s < b.cycle_s;
  return a.greens < b.greens;
}

}  // namespace

void SignalSearchGrid::validate() const {
  if (green_values.empty()) throw ConfigError("signal search: empty grid");
  for (double g : green_values) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("signal search: green values must be positive");
  }
  if (!(yellow_s >= 0.0) || !(red_clearance_s >= 0.0)) throw ConfigError("signal search: yellow/red must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("signal search: dt must be positive");
  if (sim_steps <= 0 || warmup_steps < 0 || warmup_steps >= sim_steps)
    throw ConfigError("signal search: need 0 <= warmup_steps < sim_steps");
}

SignalPlan rotated_approach_plan(const SignalPlan& plan, int approach) {
  const std::size_t n = plan.phases.size();
  std::size_t first = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (plan.phases[k].serves(approach)) {
      first = k;
      break;
    }
  }
  if (first == n) throw ConfigError("approach " + std::to_string(approach) + " is never served");
  SignalPlan out;
  for (std::size_t i = 0; i < n; ++i) {
    const Phase& p = plan.phases[(first + i) % n];
    if (p.serves(approach)) {
      out.phases.push_back({p.green_s, p.yellow_s, p.red_clearance_s, {0}});
    } else {
      out.phases.back().red_clearance_s += p.duration();
    }
  }
  return out;
}

SignalSearchResult optimize_signal_plan(const IntersectionTopology& topology, const std::vector<double>& inflows_vph,
                                        const SignalSearchGrid& grid, unsigned workers) {
  grid.validate();
  const int approaches = static_cast<int>(topology.approaches.size());
  if (static_cast<int>(inflows_vph.size()) != approaches) throw ConfigError("signal search: one inflow per approach required");
  if (static_cast<int>(topology.phase_membership.size()) != approaches)
    throw ConfigError("signal search: phase membership must list every approach");
  int phases = 0;
  for (const auto& m : topology.phase_membership) {
    for (int k : m) {
      if (k < 0) throw ConfigError("signal search: negative phase index");
      phases = std::max(phases, k + 1);
    }
  }
  if (phases == 0) throw ConfigError("signal search: no phases");
  double weight = 0.0;
  for (double q : inflows_vph) weight += q;

  SignalPlan skeleton;
  skeleton.offset_s = grid.offset_s;
  for (int k = 0; k < phases; ++k) {
    Phase p{0.0, grid.yellow_s, grid.red_clearance_s, {}};
    for (int a = 0; a < approaches; ++a) {
      const auto& m = topology.phase_membership[static_cast<std::size_t>(a)];
      if (std::find(m.begin(), m.end(), k) != m.end()) p.served_approaches.push_back(a);
    }
    skeleton.phases.push_back(std::move(p));
  }

  const auto greens = candidate_greens(grid.green_values, phases);
  SignalSearchResult result;
  result.audit.resize(greens.size());
  parallel_for(greens.size(), workers, [&](std::size_t i) {
    SignalPlan plan = skeleton;
    for (int k = 0; k < phases; ++k) plan.phases[static_cast<std::size_t>(k)].green_s = greens[i][static_cast<std::size_t>(k)];
    plan.validate(approaches);
    CandidateAudit& c = result.audit[i];
    c.index = i;
    c.greens = greens[i];
    c.cycle_s = plan.cycle();
    double weighted = 0.0;
    for (int a = 0; a < approaches; ++a) {
      const double q = inflows_vph[static_cast<std::size_t>(a)];
      const double d = approach_delay(topology, plan, a, q, grid);
      c.approach_delay_s.push_back(d);
      weighted += q * d;
    }
    c.score = weight > 0.0 ? weighted / weight : 0.0;
  });

  for (std::size_t i = 1; i < result.audit.size(); ++i) {
    if (better(result.audit[i], result.audit[result.winner])) result.winner = i;
  }
  result.plan = skeleton;
  for (int k = 0; k < phases; ++k)
    result.plan.phases[static_cast<std::size_t>(k)].green_s = result.audit[result.winner].greens[static_cast<std::size_t>(k)];
  return result;
}

bool audit_certifies(const SignalSearchResult& result) {
  if (result.audit.empty() || result.winner >= result.audit.size()) return false;
  const CandidateAudit& w = result.audit[result.winner];
  for (const CandidateAudit& c : result.audit) {
    if (c.score < w.score) return false;
  }
  for (std::size_t k = 0; k < result.plan.phases.size(); ++k) {
    if (k >= w.greens.size() || result.plan.phases[k].green_s != w.greens[k]) return false;
  }
  return std::abs(result.plan.cycle() - w.cycle_s) < 1e-9;
}

nlohmann::json SignalSearchResult::audit_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["winner"] = winner;
  nlohmann::json rows = nlohmann::json::array();
  for (const CandidateAudit& c : audit) {
    rows.push_back({{"index", c.index},
                    {"greens", c.greens},
                    {"cycle_s", c.cycle_s},
                    {"approach_delay_s", c.approach_delay_s},
                    {"score", c.score}});
  }
  j["candidates"] = rows;
  return j;
}

}  // namespace intersim
