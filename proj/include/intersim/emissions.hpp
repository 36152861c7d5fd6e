#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "intersim/common.hpp"

namespace intersim {

struct EmissionContext {
  VehicleClass vclass = VehicleClass::car;
  FuelType fuel = FuelType::ice;
  int age_band = 0;
  double temperature_c = 20.0;
  double humidity_pct = 50.0;
  double road_grade_pct = 0.0;
};

/// Constants of the VSP surrogate. Defaults match data/emission_coefficients.json.
struct EmissionCoefficients {
  double idle_rate = 1.2;     // g/s
  double vsp_slope = 0.3;     // g/s per kW/t
  double mass_factor = 1.1;   // m_f
  double gravity = 9.81;      // m/s^2
  double c_roll = 0.132;      // m/s^2
  double c_drag = 0.000302;   // 1/m
  double car_scale = 1.0;
  double truck_bus_scale = 3.5;
  std::array<double, 3> age_scale{1.0, 1.05, 1.15};
  double temp_ref_c = 20.0;
  double temp_quad = 0.0005;  // per degC^2
  double temp_cap = 1.3;
  double humidity_ref_pct = 50.0;
  double humidity_slope = 0.05;  // relative change per 50 %RH away from the reference

  /// Throws ConfigError on non-positive scales or rates.
  void validate() const;
  double class_scale(VehicleClass c) const;
  /// Throws ConfigError for an unknown band.
  double age_factor(int band) const;
  bool operator==(const EmissionCoefficients&) const = default;
};

/// Vehicle specific power [kW/t]: v*(m_f*a + g*sin(atan(grade/100)) + c_roll) + c_drag*v^3.
double vsp(double speed, double accel, double grade_pct, const EmissionCoefficients& c);

double temperature_modifier(double temperature_c, const EmissionCoefficients& c);
double humidity_modifier(double humidity_pct, const EmissionCoefficients& c);

/// CO2 tailpipe rate [g/s]. Zero for EVs; otherwise the idle rate plus a
/// slope on positive VSP, scaled by class, age band and weather.
double co2_rate(double speed, double accel, const EmissionContext& ctx, const EmissionCoefficients& c);

/// A coefficient file with its content hash.
struct CoefficientSet {
  EmissionCoefficients coefficients;
  std::string sha256;
  std::string source;
};

/// Parses a coefficient file ({"format": "intersim-emission-coefficients",
/// "version": 1, ...}). Every constant must be present; unknown keys are rejected.
EmissionCoefficients parse_coefficients(const std::string& text);
CoefficientSet load_coefficients(const std::filesystem::path& path);

/// Serialized defaults; parses back to EmissionCoefficients{}.
std::string default_coefficients_text();
CoefficientSet default_coefficient_set();

}  // namespace intersim
