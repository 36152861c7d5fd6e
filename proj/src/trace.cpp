#include "intersim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace intersim {

namespace {

constexpr std::string_view kHeader =
    "scenario_id,step,vehicle_id,approach,lane,class,controlled,pos,speed,accel,signal,phase,decision,leader_id,"
    "leader_gap,leader_speed";
constexpr std::string_view kFormat = "# intersim-trace v1 dt=";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
T parse_int(const std::string& s, std::size_t line, const char* field) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(line, field, "expected an integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s, std::size_t line, const char* field) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(line, field, "expected a number, got '" + s + "'");
  return v;
}

SignalColor parse_color(const std::string& s, std::size_t line) {
  if (s == "green") return SignalColor::green;
  if (s == "yellow") return SignalColor::yellow;
  if (s == "red") return SignalColor::red;
  throw ParseError(line, "signal", "unknown colour '" + s + "'");
}

SignalDecision parse_decision(const std::string& s, std::size_t line) {
  if (s == "none") return SignalDecision::none;
  if (s == "stop") return SignalDecision::stop;
  if (s == "go") return SignalDecision::go;
  throw ParseError(line, "decision", "unknown decision '" + s + "'");
}

}  // namespace

std::string_view to_string(SignalDecision d) {
  switch (d) {
    case SignalDecision::none: return "none";
    case SignalDecision::stop: return "stop";
    case SignalDecision::go: return "go";
  }
  return "none";
}

std::vector<TraceRow> trace_snapshot(const SimState& s) {
  std::vector<TraceRow> rows;
  rows.reserve(s.vehicles.size());
  for (const auto& [id, v] : s.vehicles) {
    TraceRow r;
    r.scenario_id = s.spec().id;
    r.step = s.step;
    r.vehicle_id = id;
    r.approach = v.approach;
    r.lane = v.lane;
    r.vclass = v.vclass;
    r.controlled = v.controlled;
    r.pos = v.pos;
    r.speed = v.speed;
    r.signal = s.colors[static_cast<std::size_t>(v.approach)];
    r.phase = s.phase.index;
    r.decision = v.decision;
    const Surroundings env = surroundings(s, v);
    if (env.vehicle) {
      r.leader_id = env.vehicle->id;
      r.leader_gap = env.vehicle->gap;
      r.leader_speed = env.vehicle->speed;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void attach_accels(std::vector<TraceRow>& rows, const StepEvents& events) {
  for (TraceRow& r : rows) {
    const auto it = std::lower_bound(events.samples.begin(), events.samples.end(), r.vehicle_id,
                                     [](const VehicleSample& x, VehicleId id) { return x.id < id; });
    if (it != events.samples.end() && it->id == r.vehicle_id) r.accel = it->accel;
  }
}

TraceWriter::TraceWriter(std::ostream& out, double dt) : out_(out) {
  out_ << kFormat << format_double(dt) << '\n' << kHeader << '\n';
}

void TraceWriter::write(const std::vector<TraceRow>& rows) {
  for (const TraceRow& r : rows) {
    out_ << r.scenario_id << ',' << r.step << ',' << r.vehicle_id << ',' << r.approach << ',' << r.lane << ','
         << to_string(r.vclass) << ',' << (r.controlled ? 1 : 0) << ',' << format_double(r.pos) << ','
         << format_double(r.speed) << ',' << format_double(r.accel) << ',' << to_string(r.signal) << ',' << r.phase
         << ',' << to_string(r.decision) << ',';
    if (r.leader_id) out_ << *r.leader_id;
    out_ << ',' << format_double(r.leader_gap) << ',' << format_double(r.leader_speed) << '\n';
  }
}

Trace read_trace(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t n = 0;
  if (!std::getline(in, line)) throw ParseError(1, "format", "empty trace");
  ++n;
  if (line.rfind(kFormat, 0) != 0) throw ParseError(n, "format", "missing '# intersim-trace v1' header");
  t.dt = parse_real(line.substr(kFormat.size()), n, "dt");
  if (!(t.dt > 0.0)) throw ParseError(n, "dt", "must be positive");
  if (!std::getline(in, line) || line != kHeader) throw ParseError(2, "header", "unexpected column header");
  ++n;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 16) throw ParseError(n, "row", "expected 16 columns, got " + std::to_string(f.size()));
    TraceRow r;
    r.scenario_id = f[0];
    r.step = parse_int<std::int64_t>(f[1], n, "step");
    r.vehicle_id = parse_int<VehicleId>(f[2], n, "vehicle_id");
    r.approach = parse_int<int>(f[3], n, "approach");
    r.lane = parse_int<int>(f[4], n, "lane");
    try {
      r.vclass = parse_vehicle_class(f[5]);
    } catch (const ConfigError& e) {
      throw ParseError(n, "class", e.what());
    }
    const int controlled = parse_int<int>(f[6], n, "controlled");
    if (controlled != 0 && controlled != 1) throw ParseError(n, "controlled", "expected 0 or 1");
    r.controlled = controlled == 1;
    r.pos = parse_real(f[7], n, "pos");
    r.speed = parse_real(f[8], n, "speed");
    if (!(r.speed >= 0.0)) throw ParseError(n, "speed", "must be >= 0");
    r.accel = parse_real(f[9], n, "accel");
    r.signal = parse_color(f[10], n);
    r.phase = parse_int<int>(f[11], n, "phase");
    r.decision = parse_decision(f[12], n);
    if (!f[13].empty()) r.leader_id = parse_int<VehicleId>(f[13], n, "leader_id");
    r.leader_gap = parse_real(f[14], n, "leader_gap");
    r.leader_speed = parse_real(f[15], n, "leader_speed");
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace intersim
