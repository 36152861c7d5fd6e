#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace intersim {

inline constexpr const char* kVersion = "0.1.0";

using VehicleId = std::uint64_t;
using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VehicleClass { car, truck_bus };
enum class FuelType { ice, ev };
enum class Turn { left, straight, right };
enum class SignalColor { green, yellow, red };

// ---------------------------------------------------------------------------
// Errors. Every domain failure derives from Error so front ends can map them
// to a single exit code.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric argument outside the domain of an operation.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or incomplete configuration (scenario, coefficients, specs).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed structured text. Carries the 1-based line and the offending field.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what);

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Two vehicles on one lane overlap after a position update.
class CollisionFault : public Error {
 public:
  CollisionFault(VehicleId follower, VehicleId leader, double gap, std::int64_t step);

  VehicleId follower() const { return follower_; }
  VehicleId leader() const { return leader_; }
  double gap() const { return gap_; }
  std::int64_t step() const { return step_; }

 private:
  VehicleId follower_;
  VehicleId leader_;
  double gap_;
  std::int64_t step_;
};

std::string_view to_string(VehicleClass c);
std::string_view to_string(FuelType f);
std::string_view to_string(Turn t);
std::string_view to_string(SignalColor c);

// Throw ConfigError on unknown names.
VehicleClass parse_vehicle_class(std::string_view s);
FuelType parse_fuel(std::string_view s);
Turn parse_turn(std::string_view s);

// ---------------------------------------------------------------------------
// Randomness. Every consumer draws from a named stream derived from a single
// seed, so results never depend on the order in which streams are used.
// ---------------------------------------------------------------------------

/// Stable 64-bit FNV-1a; used for stream tags and never for security.
std::uint64_t fnv1a64(std::string_view bytes);

Rng make_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

/// splitmix64-based combination of two seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Uniform double in [0, 1).
double uniform01(Rng& rng);

/// Uniform double in [lo, hi]; returns lo when the range is degenerate.
double uniform_in(Rng& rng, double lo, double hi);

// ---------------------------------------------------------------------------
// Shortest round-trip text for a double ("inf", "-inf", "nan" for specials).
std::string format_double(double v);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written by index; completion order is unspecified. workers == 0 means
/// hardware concurrency. Exceptions from fn are rethrown (first by index).
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

unsigned resolve_workers(unsigned requested);

}  // namespace intersim
