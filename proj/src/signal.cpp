#include "intersim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace intersim {

namespace {

struct Interval {
  double start;
  double end;
  SignalColor color;
};

// Colour timeline of one approach over [0, cycle), adjacent equal colours merged.
std::vector<Interval> timeline(const SignalPlan& plan, int approach) {
  std::vector<Interval> out;
  auto push = [&out](double start, double len, SignalColor c) {
    if (len <= 0.0) return;
    if (!out.empty() && out.back().color == c) {
      out.back().end = start + len;
    } else {
      out.push_back({start, start + len, c});
    }
  };
  double t = 0.0;
  for (const Phase& ph : plan.phases) {
    const bool served = ph.serves(approach);
    push(t, ph.green_s, served ? SignalColor::green : SignalColor::red);
    t += ph.green_s;
    push(t, ph.yellow_s, served ? SignalColor::yellow : SignalColor::red);
    t += ph.yellow_s;
    push(t, ph.red_clearance_s, SignalColor::red);
    t += ph.red_clearance_s;
  }
  return out;
}

std::size_t locate(const std::vector<Interval>& tl, double tau) {
  for (std::size_t i = 0; i < tl.size(); ++i) {
    if (tau < tl[i].end) return i;
  }
  return tl.size() - 1;
}

}  // namespace

TurnSet TurnSet::of(std::initializer_list<Turn> turns) {
  TurnSet s;
  for (Turn t : turns) s.add(t);
  return s;
}

std::vector<TurnSet> default_turn_lanes(int lane_count) {
  std::vector<TurnSet> lanes;
  if (lane_count <= 0) return lanes;
  if (lane_count == 1) return {TurnSet::all()};
  for (int i = 0; i < lane_count; ++i) {
    TurnSet s = TurnSet::of({Turn::straight});
    if (i == 0) s.add(Turn::right);
    if (i == lane_count - 1) s.add(Turn::left);
    lanes.push_back(s);
  }
  return lanes;
}

TurnSet Approach::lane_turns(int lane) const {
  if (turn_lanes.empty()) return default_turn_lanes(lane_count).at(static_cast<std::size_t>(lane));
  return turn_lanes.at(static_cast<std::size_t>(lane));
}

void IntersectionTopology::validate() const {
  if (approaches.empty()) throw ConfigError("topology: at least one approach required");
  for (std::size_t a = 0; a < approaches.size(); ++a) {
    const Approach& ap = approaches[a];
    const std::string where = "approach " + std::to_string(a) + ": ";
    if (ap.lane_count < 1) throw ConfigError(where + "lane_count must be >= 1");
    if (!(ap.lane_length > 0.0) || !std::isfinite(ap.lane_length))
      throw ConfigError(where + "lane_length must be positive");
    if (!(ap.speed_limit > 0.0) || !std::isfinite(ap.speed_limit))
      throw ConfigError(where + "speed_limit must be positive");
    if (!std::isfinite(ap.road_grade)) throw ConfigError(where + "road_grade must be finite");
    if (!ap.turn_lanes.empty()) {
      if (static_cast<int>(ap.turn_lanes.size()) != ap.lane_count)
        throw ConfigError(where + "turn_lanes must list every lane");
      TurnSet covered;
      for (const TurnSet& s : ap.turn_lanes) {
        if (s.empty()) throw ConfigError(where + "every lane must serve a movement");
        covered.bits = static_cast<std::uint8_t>(covered.bits | s.bits);
      }
      if (!(covered == TurnSet::all())) throw ConfigError(where + "turn_lanes must cover left, straight and right");
    }
  }
  if (!(internal.box_length >= 0.0) || !(internal.exit_length > 0.0))
    throw ConfigError("topology: box_length must be >= 0 and exit_length > 0");
  if (phase_membership.size() != approaches.size())
    throw ConfigError("topology: phase membership must list every approach");
  for (std::size_t a = 0; a < phase_membership.size(); ++a) {
    if (phase_membership[a].empty())
      throw ConfigError("approach " + std::to_string(a) + ": not served by any phase");
  }
}

bool Phase::serves(int approach) const {
  return std::find(served_approaches.begin(), served_approaches.end(), approach) != served_approaches.end();
}

double SignalPlan::cycle() const {
  double c = 0.0;
  for (const Phase& p : phases) c += p.duration();
  return c;
}

void SignalPlan::validate(int approach_count) const {
  if (phases.empty()) throw ConfigError("signal plan: at least one phase required");
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const Phase& p = phases[k];
    const std::string where = "phase " + std::to_string(k) + ": ";
    if (!(p.green_s > 0.0) || !std::isfinite(p.green_s)) throw ConfigError(where + "green must be positive");
    if (!(p.yellow_s >= 0.0) || !std::isfinite(p.yellow_s)) throw ConfigError(where + "yellow must be >= 0");
    if (!(p.red_clearance_s >= 0.0) || !std::isfinite(p.red_clearance_s))
      throw ConfigError(where + "red_clearance must be >= 0");
    if (p.served_approaches.empty()) throw ConfigError(where + "serves no approach");
    for (int a : p.served_approaches) {
      if (a < 0 || a >= approach_count) throw ConfigError(where + "serves unknown approach " + std::to_string(a));
    }
  }
  const double c = cycle();
  if (!(offset_s >= 0.0) || !(offset_s < c)) throw ConfigError("signal plan: offset must lie in [0, cycle)");
  for (int a = 0; a < approach_count; ++a) {
    const bool served = std::any_of(phases.begin(), phases.end(), [a](const Phase& p) { return p.serves(a); });
    if (!served) throw ConfigError("signal plan: approach " + std::to_string(a) + " is never served");
  }
}

double SignalPlan::local_time(double clock) const {
  const double c = cycle();
  double tau = std::fmod(clock - offset_s, c);
  if (tau < 0.0) tau += c;
  if (tau >= c) tau = 0.0;
  return tau;
}

PhaseClock SignalPlan::phase_at(double clock) const {
  double tau = local_time(clock);
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const double d = phases[k].duration();
    if (tau < d || k + 1 == phases.size()) return {static_cast<int>(k), tau};
    tau -= d;
  }
  return {};
}

SignalColor SignalPlan::color(int approach, double clock) const {
  const PhaseClock pc = phase_at(clock);
  const Phase& p = phases[static_cast<std::size_t>(pc.index)];
  if (!p.serves(approach)) return SignalColor::red;
  if (pc.elapsed < p.green_s) return SignalColor::green;
  if (pc.elapsed < p.green_s + p.yellow_s) return SignalColor::yellow;
  return SignalColor::red;
}

double SignalPlan::time_in_state_remaining(int approach, double clock) const {
  const auto tl = timeline(*this, approach);
  if (tl.size() == 1) return kInf;
  const double tau = local_time(clock);
  std::size_t i = locate(tl, tau);
  const SignalColor col = tl[i].color;
  double remaining = tl[i].end - tau;
  // The last interval may continue into the first one of the next cycle.
  if (i + 1 == tl.size() && tl.front().color == col) remaining += tl.front().end - tl.front().start;
  return remaining;
}

double SignalPlan::time_to_green(int approach, double clock, int k) const {
  if (k < 1) throw InvalidInput("time_to_green: k must be >= 1");
  const auto tl = timeline(*this, approach);
  std::vector<double> onsets;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const Interval& prev = tl[(i + tl.size() - 1) % tl.size()];
    if (tl[i].color == SignalColor::green && (tl.size() == 1 || prev.color != SignalColor::green))
      onsets.push_back(tl[i].start);
  }
  if (onsets.empty() || tl.size() == 1) return kInf;
  const double c = cycle();
  const double tau = local_time(clock);
  int found = 0;
  for (int m = 0;; ++m) {
    for (double o : onsets) {
      const double t = o + m * c;
      if (t > tau && ++found == k) return t - tau;
    }
  }
}

ApproachTiming SignalPlan::timing(int approach) const {
  ApproachTiming t;
  for (const Phase& p : phases) {
    if (p.serves(approach)) {
      t.green_s += p.green_s;
      t.yellow_s += p.yellow_s;
      t.red_s += p.red_clearance_s;
    } else {
      t.red_s += p.duration();
    }
  }
  return t;
}

std::vector<std::vector<int>> membership_from_plan(const SignalPlan& plan, int approach_count) {
  std::vector<std::vector<int>> m(static_cast<std::size_t>(approach_count));
  for (std::size_t k = 0; k < plan.phases.size(); ++k) {
    for (int a : plan.phases[k].served_approaches) {
      if (a >= 0 && a < approach_count) m[static_cast<std::size_t>(a)].push_back(static_cast<int>(k));
    }
  }
  return m;
}

void validate_pairing(const IntersectionTopology& topology, const SignalPlan& plan) {
  const int n = static_cast<int>(topology.approaches.size());
  plan.validate(n);
  const auto expected = membership_from_plan(plan, n);
  for (int a = 0; a < n; ++a) {
    auto listed = topology.phase_membership[static_cast<std::size_t>(a)];
    std::sort(listed.begin(), listed.end());
    if (listed != expected[static_cast<std::size_t>(a)])
      throw ConfigError("approach " + std::to_string(a) + ": phase membership disagrees with the signal plan");
  }
}

bool SpawnGate::is_green(double clock) const {
  double tau = std::fmod(clock - offset_s, cycle_s);
  if (tau < 0.0) tau += cycle_s;
  return tau < green_s;
}

void SpawnGate::validate() const {
  if (!(cycle_s > 0.0) || !(green_s > 0.0) || green_s > cycle_s)
    throw ConfigError("spawn gate: need 0 < green <= cycle");
  if (!(offset_s >= 0.0) || !(offset_s < cycle_s)) throw ConfigError("spawn gate: offset must lie in [0, cycle)");
}

}  // namespace intersim
