#include "intersim/context.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "intersim/io.hpp"

namespace intersim {

namespace {

using nlohmann::json;

constexpr int kSampleAttempts = 100;
constexpr int kRejectionAttempts = 10000;
constexpr const char* kDistFormat = "intersim-distribution";

// Values used when a distribution leaves a feature unset.
const std::vector<LaneSetup> kDefaultSetups{{1, 2}};
constexpr Range kDefaultInflow{300.0, 300.0};
constexpr Range kDefaultGreen{30.0, 30.0};
constexpr Range kDefaultRed{2.0, 2.0};
constexpr Range kDefaultLaneLength{200.0, 200.0};
constexpr Range kDefaultSpeedLimit{15.0, 15.0};
constexpr Range kDefaultOffset{0.0, 0.0};
constexpr Range kDefaultGrade{0.0, 0.0};
constexpr Range kDefaultYellow{3.0, 3.0};
constexpr Range kDefaultTemperature{20.0, 20.0};
constexpr Range kDefaultHumidity{50.0, 50.0};
constexpr Range kDefaultAdoption{0.0, 0.0};
constexpr Range kDefaultEvShare{0.0, 0.0};
constexpr Range kDefaultTruckShare{0.05, 0.05};

struct RangeField {
  const char* key;
  std::optional<Range> FeatureDistribution::*member;
  Range fallback;
  double min;
  double max;
};

const std::vector<RangeField>& range_fields() {
  static const std::vector<RangeField> fields{
      {"vehicle_inflow", &FeatureDistribution::vehicle_inflow, kDefaultInflow, 0.0, kInf},
      {"green_phase_time", &FeatureDistribution::green_phase_time, kDefaultGreen, 1e-9, kInf},
      {"red_phase_time", &FeatureDistribution::red_phase_time, kDefaultRed, 0.0, kInf},
      {"lane_length", &FeatureDistribution::lane_length, kDefaultLaneLength, 1e-9, kInf},
      {"speed_limit", &FeatureDistribution::speed_limit, kDefaultSpeedLimit, 1e-9, kInf},
      {"signal_offset", &FeatureDistribution::signal_offset, kDefaultOffset, 0.0, kInf},
      {"road_grade", &FeatureDistribution::road_grade, kDefaultGrade, -kInf, kInf},
      {"yellow_time", &FeatureDistribution::yellow_time, kDefaultYellow, 0.0, kInf},
      {"temperature", &FeatureDistribution::temperature, kDefaultTemperature, -kInf, kInf},
      {"humidity", &FeatureDistribution::humidity, kDefaultHumidity, 0.0, 100.0},
      {"adoption_level", &FeatureDistribution::adoption_level, kDefaultAdoption, 0.0, 1.0},
      {"ev_share", &FeatureDistribution::ev_share, kDefaultEvShare, 0.0, 1.0},
      {"truck_bus_share", &FeatureDistribution::truck_bus_share, kDefaultTruckShare, 0.0, 1.0},
  };
  return fields;
}

Range effective(const FeatureDistribution& d, const RangeField& f) {
  return (d.*f.member).value_or(f.fallback);
}

const RangeField& field(const char* key) {
  for (const auto& f : range_fields()) {
    if (std::string_view(f.key) == key) return f;
  }
  throw Error(std::string("no range field ") + key);
}

Range eff(const FeatureDistribution& d, const char* key) {
  return effective(d, field(key));
}

const std::vector<LaneSetup>& setups(const FeatureDistribution& d) {
  return d.lane_setup ? *d.lane_setup : kDefaultSetups;
}

bool has_setup(const std::vector<LaneSetup>& set, LaneSetup s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

Range parse_range(const json& v, const std::string& key) {
  if (v.is_number()) {
    const double x = v.get<double>();
    return {x, x};
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError("distribution: '" + key + "' must be a number or a [lo, hi] pair");
}

// Field checks shared by the dataset parser.
[[noreturn]] void bad(std::size_t line, const std::string& field, const std::string& what) {
  throw ParseError(line, field, what);
}

double get_number(const json& obj, const std::string& key, const std::string& path, std::size_t line) {
  if (!obj.contains(key)) bad(line, path + key, "missing");
  const json& v = obj.at(key);
  if (!v.is_number()) bad(line, path + key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(line, path + key, "must be finite");
  return x;
}

int get_int(const json& obj, const std::string& key, const std::string& path, std::size_t line) {
  if (!obj.contains(key)) bad(line, path + key, "missing");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(line, path + key, "expected an integer");
  return v.get<int>();
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path, std::size_t line) {
  for (const auto& [k, v] : obj.items()) {
    if (!known.count(k)) bad(line, path + k, "unknown field");
  }
}

}  // namespace

void FeatureDistribution::validate() const {
  if (approach_count < 1) throw ConfigError("distribution: approach_count must be >= 1");
  for (const auto& f : range_fields()) {
    const auto& r = this->*f.member;
    if (!r) continue;
    const std::string where = std::string("distribution: '") + f.key + "' ";
    if (!std::isfinite(r->lo) || !std::isfinite(r->hi)) throw ConfigError(where + "must be finite");
    if (r->lo > r->hi) throw ConfigError(where + "is empty (lo > hi)");
    if (r->lo < f.min || r->hi > f.max) throw ConfigError(where + "lies outside the feature's domain");
  }
  if (lane_setup) {
    if (lane_setup->empty()) throw ConfigError("distribution: 'lane_setup' is empty");
    for (const LaneSetup& s : *lane_setup) {
      if (s.lane_count < 1 || s.phase_count < 1)
        throw ConfigError("distribution: 'lane_setup' entries need lane and phase counts >= 1");
    }
  }
  const auto& sets = setups(*this);
  const bool feasible =
      std::any_of(sets.begin(), sets.end(), [this](const LaneSetup& s) { return s.phase_count <= approach_count; });
  if (!feasible) throw ConfigError("distribution: every lane setup has more phases than approaches");
}

FeatureDistribution FeatureDistribution::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("distribution: expected an object");
  FeatureDistribution d;
  std::set<std::string> known{"format", "version", "lane_setup", "approach_count", "upstream_gate"};
  for (const auto& f : range_fields()) known.insert(f.key);
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("distribution: unknown key '" + k + "'");
  }
  if (j.contains("format") && j.at("format") != kDistFormat)
    throw ConfigError(std::string("distribution: format must be '") + kDistFormat + "'");
  if (j.contains("version") && j.at("version") != 1) throw ConfigError("distribution: unsupported version");
  for (const auto& f : range_fields()) {
    if (j.contains(f.key)) d.*f.member = parse_range(j.at(f.key), f.key);
  }
  if (j.contains("lane_setup")) {
    const json& ls = j.at("lane_setup");
    if (!ls.is_array()) throw ConfigError("distribution: 'lane_setup' must be a list of [lanes, phases] pairs");
    std::vector<LaneSetup> out;
    for (const json& e : ls) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
        throw ConfigError("distribution: 'lane_setup' entries must be [lanes, phases] integer pairs");
      out.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    d.lane_setup = std::move(out);
  }
  if (j.contains("approach_count")) {
    if (!j.at("approach_count").is_number_integer()) throw ConfigError("distribution: 'approach_count' must be an integer");
    d.approach_count = j.at("approach_count").get<int>();
  }
  if (j.contains("upstream_gate")) {
    if (!j.at("upstream_gate").is_boolean()) throw ConfigError("distribution: 'upstream_gate' must be a boolean");
    d.upstream_gate = j.at("upstream_gate").get<bool>();
  }
  d.validate();
  return d;
}

json FeatureDistribution::to_json() const {
  json j = json::object();
  j["format"] = kDistFormat;
  j["version"] = 1;
  j["approach_count"] = approach_count;
  j["upstream_gate"] = upstream_gate;
  if (lane_setup) {
    json ls = json::array();
    for (const LaneSetup& s : *lane_setup) ls.push_back({s.lane_count, s.phase_count});
    j["lane_setup"] = ls;
  }
  for (const auto& f : range_fields()) {
    if (const auto& r = this->*f.member) j[f.key] = {r->lo, r->hi};
  }
  return j;
}

FeatureDistribution load_distribution(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return FeatureDistribution::from_json(j);
}

IntersectionTopology ContextVector::topology() const {
  IntersectionTopology t;
  for (const ApproachContext& a : approaches) {
    Approach ap;
    ap.lane_count = a.lane_count;
    ap.lane_length = a.lane_length;
    ap.speed_limit = a.speed_limit;
    ap.road_grade = a.road_grade;
    t.approaches.push_back(ap);
  }
  t.phase_membership = membership_from_plan(plan(), static_cast<int>(approaches.size()));
  return t;
}

SignalPlan ContextVector::plan() const {
  SignalPlan p;
  for (const PhaseContext& ph : phases) p.phases.push_back({ph.green_s, ph.yellow_s, ph.red_s, ph.served_approaches});
  p.offset_s = signal_offset;
  return p;
}

void ContextVector::validate() const {
  if (approaches.empty()) throw ConfigError("context " + id + ": no approaches");
  for (const ApproachContext& a : approaches) {
    if (!(a.inflow_vph >= 0.0) || !std::isfinite(a.inflow_vph)) throw ConfigError("context " + id + ": inflow must be >= 0");
  }
  topology().validate();
  plan().validate(static_cast<int>(approaches.size()));
  if (!(humidity >= 0.0 && humidity <= 100.0)) throw ConfigError("context " + id + ": humidity must lie in [0, 100]");
  if (!std::isfinite(temperature)) throw ConfigError("context " + id + ": temperature must be finite");
  auto share = [this](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("context " + id + ": " + name + " must lie in [0, 1]");
  };
  share(adoption_level, "adoption_level");
  share(ev_share, "ev_share");
  share(truck_bus_share, "truck_bus_share");
}

ScenarioSpec make_scenario(const ContextVector& ctx, const DriverPopulation& drivers) {
  ctx.validate();
  ScenarioSpec s;
  s.id = ctx.id;
  s.topology = ctx.topology();
  s.plan = ctx.plan();
  for (const ApproachContext& a : ctx.approaches) s.inflows_vph.push_back(a.inflow_vph);
  s.fleet.ev_share = ctx.ev_share;
  s.fleet.truck_bus_share = ctx.truck_bus_share;
  s.adoption_level = ctx.adoption_level;
  s.arrival_seed = ctx.seed;
  s.driver_seed = ctx.seed;
  s.adoption_seed = ctx.seed;
  s.drivers = drivers;
  s.validate();
  return s;
}

std::optional<SpawnGate> spawn_gate_for(const ContextVector& ctx) {
  if (!ctx.upstream_gate) return std::nullopt;
  const double cycle = ctx.plan().cycle();
  return SpawnGate{cycle, 0.5 * cycle, std::fmod(ctx.signal_offset, cycle)};
}

EmissionContext emission_context(const ContextVector& ctx, int approach, VehicleClass vclass, FuelType fuel,
                                 int age_band) {
  EmissionContext e;
  e.vclass = vclass;
  e.fuel = fuel;
  e.age_band = age_band;
  e.temperature_c = ctx.temperature;
  e.humidity_pct = ctx.humidity;
  e.road_grade_pct = ctx.approaches.at(static_cast<std::size_t>(approach)).road_grade;
  return e;
}

std::vector<std::vector<int>> round_robin_service(int approach_count, int phase_count) {
  std::vector<std::vector<int>> served(static_cast<std::size_t>(phase_count));
  for (int a = 0; a < approach_count; ++a) served[static_cast<std::size_t>(a % phase_count)].push_back(a);
  return served;
}

ContextVector sample_context(const FeatureDistribution& dist, Rng& rng) {
  dist.validate();
  const auto& sets = setups(dist);
  for (int attempt = 0; attempt < kSampleAttempts; ++attempt) {
    const auto pick = std::min(sets.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(sets.size())));
    const LaneSetup setup = sets[pick];

    ContextVector c;
    for (int a = 0; a < dist.approach_count; ++a) {
      ApproachContext ap;
      ap.lane_count = setup.lane_count;
      ap.inflow_vph = eff(dist, "vehicle_inflow").sample(rng);
      ap.lane_length = eff(dist, "lane_length").sample(rng);
      ap.speed_limit = eff(dist, "speed_limit").sample(rng);
      ap.road_grade = eff(dist, "road_grade").sample(rng);
      c.approaches.push_back(ap);
    }
    if (setup.phase_count > dist.approach_count) continue;
    const auto served = round_robin_service(dist.approach_count, setup.phase_count);
    for (int k = 0; k < setup.phase_count; ++k) {
      PhaseContext ph;
      ph.green_s = eff(dist, "green_phase_time").sample(rng);
      ph.yellow_s = eff(dist, "yellow_time").sample(rng);
      ph.red_s = eff(dist, "red_phase_time").sample(rng);
      ph.served_approaches = served[static_cast<std::size_t>(k)];
      c.phases.push_back(ph);
    }
    c.signal_offset = eff(dist, "signal_offset").sample(rng);
    c.temperature = eff(dist, "temperature").sample(rng);
    c.humidity = eff(dist, "humidity").sample(rng);
    c.adoption_level = eff(dist, "adoption_level").sample(rng);
    c.ev_share = eff(dist, "ev_share").sample(rng);
    c.truck_bus_share = eff(dist, "truck_bus_share").sample(rng);
    c.upstream_gate = dist.upstream_gate;
    c.seed = rng() >> 11;
    if (!(c.signal_offset < c.plan().cycle())) continue;
    c.validate();
    return c;
  }
  throw ConfigError("distribution: no feasible context after " + std::to_string(kSampleAttempts) + " attempts");
}

bool in_region(const ContextVector& ctx, const FeatureDistribution& region) {
  if (static_cast<int>(ctx.approaches.size()) != region.approach_count) return false;
  if (region.lane_setup) {
    for (const ApproachContext& a : ctx.approaches) {
      if (!has_setup(*region.lane_setup, {a.lane_count, ctx.phase_count()})) return false;
    }
  }
  auto check = [&region](const char* key, double x) {
    const auto& r = region.*field(key).member;
    return !r || r->contains(x);
  };
  for (const ApproachContext& a : ctx.approaches) {
    if (!check("vehicle_inflow", a.inflow_vph) || !check("lane_length", a.lane_length) ||
        !check("speed_limit", a.speed_limit) || !check("road_grade", a.road_grade))
      return false;
  }
  for (const PhaseContext& p : ctx.phases) {
    if (!check("green_phase_time", p.green_s) || !check("red_phase_time", p.red_s) || !check("yellow_time", p.yellow_s))
      return false;
  }
  return check("signal_offset", ctx.signal_offset) && check("temperature", ctx.temperature) &&
         check("humidity", ctx.humidity) && check("adoption_level", ctx.adoption_level) &&
         check("ev_share", ctx.ev_share) && check("truck_bus_share", ctx.truck_bus_share);
}

std::vector<bool> assign_adoption(std::size_t n, double level, Rng& rng) {
  if (!(level >= 0.0 && level <= 1.0)) throw InvalidInput("adoption level must lie in [0, 1]");
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = draw_adoption(level, rng);
  return out;
}

SystematicSplit::SystematicSplit(FeatureDistribution train, FeatureDistribution test)
    : train_(std::move(train)), test_(std::move(test)) {
  train_.validate();
  test_.validate();
  if (train_.approach_count != test_.approach_count)
    throw ConfigError("systematicity: train and test approach counts differ");

  bool covers_train = true;
  if (test_.lane_setup) {
    for (const LaneSetup& s : *test_.lane_setup) {
      if (!has_setup(setups(train_), s))
        throw ConfigError("systematicity: test lane setup (" + std::to_string(s.lane_count) + "," +
                          std::to_string(s.phase_count) + ") is outside the training support");
    }
    for (const LaneSetup& s : setups(train_)) {
      if (!has_setup(*test_.lane_setup, s)) covers_train = false;
    }
  }
  for (const auto& f : range_fields()) {
    const auto& r = test_.*f.member;
    if (!r) continue;
    const Range tr = effective(train_, f);
    if (!r->within(tr)) throw ConfigError(std::string("systematicity: test range of '") + f.key + "' is outside the training support");
    if (!tr.within(*r)) covers_train = false;
  }
  if (covers_train) throw ConfigError("systematicity: the holdout region covers the whole training distribution");

  test_sampling_ = train_;
  if (test_.lane_setup) test_sampling_.lane_setup = test_.lane_setup;
  for (const auto& f : range_fields()) {
    if (test_.*f.member) test_sampling_.*f.member = test_.*f.member;
  }
  test_sampling_.validate();
}

ContextVector SystematicSplit::sample_train(Rng& rng) const {
  for (int i = 0; i < kRejectionAttempts; ++i) {
    ContextVector c = sample_context(train_, rng);
    if (!in_region(c, test_)) return c;
  }
  throw ConfigError("systematicity: no training context outside the holdout region after " +
                    std::to_string(kRejectionAttempts) + " draws");
}

ContextVector SystematicSplit::sample_test(Rng& rng) const {
  return sample_context(test_sampling_, rng);
}

SystematicSplit split_systematicity(const FeatureDistribution& train, const FeatureDistribution& test) {
  return SystematicSplit(train, test);
}

json context_to_json(const ContextVector& ctx) {
  json j = json::object();
  j["id"] = ctx.id;
  j["seed"] = ctx.seed;
  json aps = json::array();
  for (const ApproachContext& a : ctx.approaches) {
    aps.push_back({{"lane_count", a.lane_count},
                   {"lane_length", a.lane_length},
                   {"speed_limit", a.speed_limit},
                   {"road_grade", a.road_grade},
                   {"inflow_vph", a.inflow_vph}});
  }
  j["approaches"] = aps;
  json phs = json::array();
  for (const PhaseContext& p : ctx.phases) {
    phs.push_back({{"green_s", p.green_s}, {"yellow_s", p.yellow_s}, {"red_s", p.red_s}, {"served_approaches", p.served_approaches}});
  }
  j["phases"] = phs;
  j["signal_offset"] = ctx.signal_offset;
  j["temperature"] = ctx.temperature;
  j["humidity"] = ctx.humidity;
  j["adoption_level"] = ctx.adoption_level;
  j["ev_share"] = ctx.ev_share;
  j["truck_bus_share"] = ctx.truck_bus_share;
  j["upstream_gate"] = ctx.upstream_gate;
  return j;
}

ContextVector context_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) bad(line, "record", "expected an object");
  reject_unknown(j,
                 {"id", "seed", "approaches", "phases", "signal_offset", "temperature", "humidity", "adoption_level",
                  "ev_share", "truck_bus_share", "upstream_gate"},
                 "", line);
  ContextVector c;
  if (!j.contains("id") || !j.at("id").is_string()) bad(line, "id", "expected a string");
  c.id = j.at("id").get<std::string>();
  if (!j.contains("seed") || !j.at("seed").is_number_integer() ||
      (!j.at("seed").is_number_unsigned() && j.at("seed").get<std::int64_t>() < 0))
    bad(line, "seed", "expected a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  if (!j.contains("approaches") || !j.at("approaches").is_array() || j.at("approaches").empty())
    bad(line, "approaches", "expected a non-empty list");
  const json& aps = j.at("approaches");
  for (std::size_t i = 0; i < aps.size(); ++i) {
    const std::string path = "approaches[" + std::to_string(i) + "].";
    const json& a = aps[i];
    if (!a.is_object()) bad(line, path.substr(0, path.size() - 1), "expected an object");
    reject_unknown(a, {"lane_count", "lane_length", "speed_limit", "road_grade", "inflow_vph"}, path, line);
    ApproachContext ap;
    ap.lane_count = get_int(a, "lane_count", path, line);
    if (ap.lane_count < 1) bad(line, path + "lane_count", "must be >= 1");
    ap.lane_length = get_number(a, "lane_length", path, line);
    if (!(ap.lane_length > 0.0)) bad(line, path + "lane_length", "must be > 0");
    ap.speed_limit = get_number(a, "speed_limit", path, line);
    if (!(ap.speed_limit > 0.0)) bad(line, path + "speed_limit", "must be > 0");
    ap.road_grade = get_number(a, "road_grade", path, line);
    ap.inflow_vph = get_number(a, "inflow_vph", path, line);
    if (!(ap.inflow_vph >= 0.0)) bad(line, path + "inflow_vph", "must be >= 0");
    c.approaches.push_back(ap);
  }

  if (!j.contains("phases") || !j.at("phases").is_array() || j.at("phases").empty())
    bad(line, "phases", "expected a non-empty list");
  const json& phs = j.at("phases");
  for (std::size_t i = 0; i < phs.size(); ++i) {
    const std::string path = "phases[" + std::to_string(i) + "].";
    const json& p = phs[i];
    if (!p.is_object()) bad(line, path.substr(0, path.size() - 1), "expected an object");
    reject_unknown(p, {"green_s", "yellow_s", "red_s", "served_approaches"}, path, line);
    PhaseContext ph;
    ph.green_s = get_number(p, "green_s", path, line);
    if (!(ph.green_s > 0.0)) bad(line, path + "green_s", "must be > 0");
    ph.yellow_s = get_number(p, "yellow_s", path, line);
    if (!(ph.yellow_s >= 0.0)) bad(line, path + "yellow_s", "must be >= 0");
    ph.red_s = get_number(p, "red_s", path, line);
    if (!(ph.red_s >= 0.0)) bad(line, path + "red_s", "must be >= 0");
    if (!p.contains("served_approaches") || !p.at("served_approaches").is_array())
      bad(line, path + "served_approaches", "expected a list of approach indices");
    for (const json& a : p.at("served_approaches")) {
      if (!a.is_number_integer()) bad(line, path + "served_approaches", "expected integers");
      const int idx = a.get<int>();
      if (idx < 0 || idx >= static_cast<int>(c.approaches.size()))
        bad(line, path + "served_approaches", "unknown approach " + std::to_string(idx));
      ph.served_approaches.push_back(idx);
    }
    c.phases.push_back(std::move(ph));
  }

  c.signal_offset = get_number(j, "signal_offset", "", line);
  c.temperature = get_number(j, "temperature", "", line);
  c.humidity = get_number(j, "humidity", "", line);
  if (!(c.humidity >= 0.0 && c.humidity <= 100.0)) bad(line, "humidity", "must lie in [0, 100]");
  c.adoption_level = get_number(j, "adoption_level", "", line);
  if (!(c.adoption_level >= 0.0 && c.adoption_level <= 1.0)) bad(line, "adoption_level", "must lie in [0, 1]");
  c.ev_share = get_number(j, "ev_share", "", line);
  if (!(c.ev_share >= 0.0 && c.ev_share <= 1.0)) bad(line, "ev_share", "must lie in [0, 1]");
  c.truck_bus_share = get_number(j, "truck_bus_share", "", line);
  if (!(c.truck_bus_share >= 0.0 && c.truck_bus_share <= 1.0)) bad(line, "truck_bus_share", "must lie in [0, 1]");
  if (j.contains("upstream_gate")) {
    if (!j.at("upstream_gate").is_boolean()) bad(line, "upstream_gate", "expected a boolean");
    c.upstream_gate = j.at("upstream_gate").get<bool>();
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    bad(line, "record", e.what());
  }
  return c;
}

std::string dataset_text(const std::vector<ContextVector>& contexts) {
  std::string out = R"({"format":"intersim-dataset","version":1})";
  out += '\n';
  for (const ContextVector& c : contexts) {
    out += context_to_json(c).dump();
    out += '\n';
  }
  return out;
}

std::vector<ContextVector> parse_dataset(const std::string& text) {
  std::vector<ContextVector> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_seen = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, "record", std::string("invalid JSON: ") + e.what());
    }
    if (!header_seen) {
      if (!j.is_object() || j.value("format", "") != "intersim-dataset")
        throw ParseError(line_no, "format", "expected the intersim-dataset header");
      if (!j.contains("version") || j.at("version") != 1) throw ParseError(line_no, "version", "unsupported version");
      reject_unknown(j, {"format", "version"}, "", line_no);
      header_seen = true;
      continue;
    }
    out.push_back(context_from_json(j, line_no));
  }
  return out;
}

void save_dataset(const std::vector<ContextVector>& contexts, const std::filesystem::path& path) {
  write_file(path, dataset_text(contexts));
}

std::vector<ContextVector> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

}  // namespace intersim
