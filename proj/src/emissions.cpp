#include "intersim/emissions.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

#include "intersim/io.hpp"

namespace intersim {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "intersim-emission-coefficients";

double require_number(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("emission coefficients: missing '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string("emission coefficients: '") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string("emission coefficients: '") + key + "' must be finite");
  return x;
}

}  // namespace

void EmissionCoefficients::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string("emission coefficients: ") + name + " must be > 0");
  };
  positive(idle_rate, "idle_rate");
  positive(mass_factor, "mass_factor");
  positive(gravity, "gravity");
  positive(car_scale, "car_scale");
  positive(truck_bus_scale, "truck_bus_scale");
  for (double a : age_scale) positive(a, "age_scale");
  positive(temp_cap, "temp_cap");
  if (!(vsp_slope >= 0.0)) throw ConfigError("emission coefficients: vsp_slope must be >= 0");
  if (!(c_roll >= 0.0) || !(c_drag >= 0.0)) throw ConfigError("emission coefficients: resistance terms must be >= 0");
  if (!(temp_quad >= 0.0)) throw ConfigError("emission coefficients: temp_quad must be >= 0");
  if (!(temp_cap >= 1.0)) throw ConfigError("emission coefficients: temp_cap must be >= 1");
  if (!(std::abs(humidity_slope) < 1.0)) throw ConfigError("emission coefficients: |humidity_slope| must be < 1");
}

double EmissionCoefficients::class_scale(VehicleClass c) const {
  return c == VehicleClass::car ? car_scale : truck_bus_scale;
}

double EmissionCoefficients::age_factor(int band) const {
  if (band < 0 || band >= static_cast<int>(age_scale.size()))
    throw ConfigError("unknown vehicle age band " + std::to_string(band));
  return age_scale[static_cast<std::size_t>(band)];
}

double vsp(double speed, double accel, double grade_pct, const EmissionCoefficients& c) {
  if (!(speed >= 0.0)) throw InvalidInput("vsp: speed must be >= 0");
  const double slope = c.gravity * std::sin(std::atan(grade_pct / 100.0));
  return speed * (c.mass_factor * accel + slope + c.c_roll) + c.c_drag * speed * speed * speed;
}

double temperature_modifier(double temperature_c, const EmissionCoefficients& c) {
  const double d = temperature_c - c.temp_ref_c;
  return std::min(c.temp_cap, 1.0 + c.temp_quad * d * d);
}

double humidity_modifier(double humidity_pct, const EmissionCoefficients& c) {
  if (!(humidity_pct >= 0.0 && humidity_pct <= 100.0)) throw InvalidInput("humidity must lie in [0, 100] %RH");
  return 1.0 + c.humidity_slope * (humidity_pct - c.humidity_ref_pct) / 50.0;
}

double co2_rate(double speed, double accel, const EmissionContext& ctx, const EmissionCoefficients& c) {
  if (ctx.fuel == FuelType::ev) return 0.0;
  const double p = std::max(0.0, vsp(speed, accel, ctx.road_grade_pct, c));
  return (c.idle_rate + c.vsp_slope * p) * c.class_scale(ctx.vclass) * c.age_factor(ctx.age_band) *
         temperature_modifier(ctx.temperature_c, c) * humidity_modifier(ctx.humidity_pct, c);
}

EmissionCoefficients parse_coefficients(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("emission coefficients: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("emission coefficients: expected an object");
  if (j.value("format", "") != kFormat) throw ConfigError(std::string("emission coefficients: format must be '") + kFormat + "'");
  if (!j.contains("version") || j.at("version") != 1) throw ConfigError("emission coefficients: unsupported version");

  static const std::set<std::string> known{"format",  "version",   "idle_rate",       "vsp_slope",        "mass_factor",
                                           "gravity", "c_roll",    "c_drag",          "class_scale",      "age_scale",
                                           "temp_ref_c", "temp_quad", "temp_cap",     "humidity_ref_pct", "humidity_slope"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("emission coefficients: unknown key '" + k + "'");
  }

  EmissionCoefficients c;
  c.idle_rate = require_number(j, "idle_rate");
  c.vsp_slope = require_number(j, "vsp_slope");
  c.mass_factor = require_number(j, "mass_factor");
  c.gravity = require_number(j, "gravity");
  c.c_roll = require_number(j, "c_roll");
  c.c_drag = require_number(j, "c_drag");
  c.temp_ref_c = require_number(j, "temp_ref_c");
  c.temp_quad = require_number(j, "temp_quad");
  c.temp_cap = require_number(j, "temp_cap");
  c.humidity_ref_pct = require_number(j, "humidity_ref_pct");
  c.humidity_slope = require_number(j, "humidity_slope");

  if (!j.contains("class_scale") || !j.at("class_scale").is_object())
    throw ConfigError("emission coefficients: 'class_scale' must be an object");
  const json& cs = j.at("class_scale");
  for (const auto& [k, v] : cs.items()) {
    if (k != "car" && k != "truck_bus") throw ConfigError("emission coefficients: unknown vehicle class '" + k + "'");
  }
  c.car_scale = require_number(cs, "car");
  c.truck_bus_scale = require_number(cs, "truck_bus");

  if (!j.contains("age_scale") || !j.at("age_scale").is_array() || j.at("age_scale").size() != c.age_scale.size())
    throw ConfigError("emission coefficients: 'age_scale' must list 3 bands");
  for (std::size_t i = 0; i < c.age_scale.size(); ++i) {
    if (!j.at("age_scale")[i].is_number()) throw ConfigError("emission coefficients: age_scale entries must be numbers");
    c.age_scale[i] = j.at("age_scale")[i].get<double>();
  }
  c.validate();
  return c;
}

CoefficientSet load_coefficients(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return {parse_coefficients(text), sha256_hex(text), path.string()};
}

std::string default_coefficients_text() {
  const EmissionCoefficients c;
  json j = json::object();
  j["format"] = kFormat;
  j["version"] = 1;
  j["idle_rate"] = c.idle_rate;
  j["vsp_slope"] = c.vsp_slope;
  j["mass_factor"] = c.mass_factor;
  j["gravity"] = c.gravity;
  j["c_roll"] = c.c_roll;
  j["c_drag"] = c.c_drag;
  j["class_scale"] = {{"car", c.car_scale}, {"truck_bus", c.truck_bus_scale}};
  j["age_scale"] = c.age_scale;
  j["temp_ref_c"] = c.temp_ref_c;
  j["temp_quad"] = c.temp_quad;
  j["temp_cap"] = c.temp_cap;
  j["humidity_ref_pct"] = c.humidity_ref_pct;
  j["humidity_slope"] = c.humidity_slope;
  return j.dump(2) + "\n";
}

CoefficientSet default_coefficient_set() {
  const std::string text = default_coefficients_text();
  return {parse_coefficients(text), sha256_hex(text), "builtin"};
}

}  // namespace intersim
