#include "intersim/common.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <thread>
#include <vector>

namespace intersim {

ParseError::ParseError(std::size_t line, std::string field, const std::string& what)
    : Error("line " + std::to_string(line) + ": field '" + field + "': " + what),
      line_(line),
      field_(std::move(field)) {}

CollisionFault::CollisionFault(VehicleId follower, VehicleId leader, double gap, std::int64_t step)
    : Error("collision at step " + std::to_string(step) + ": vehicle " + std::to_string(follower) +
            " overlaps leader " + std::to_string(leader) + " (gap " + format_double(gap) + " m)"),
      follower_(follower),
      leader_(leader),
      gap_(gap),
      step_(step) {}

std::string_view to_string(VehicleClass c) {
  return c == VehicleClass::car ? "car" : "truck_bus";
}

std::string_view to_string(FuelType f) {
  return f == FuelType::ice ? "ice" : "ev";
}

std::string_view to_string(Turn t) {
  switch (t) {
    case Turn::left: return "left";
    case Turn::straight: return "straight";
    case Turn::right: return "right";
  }
  return "straight";
}

std::string_view to_string(SignalColor c) {
  switch (c) {
    case SignalColor::green: return "green";
    case SignalColor::yellow: return "yellow";
    case SignalColor::red: return "red";
  }
  return "red";
}

VehicleClass parse_vehicle_class(std::string_view s) {
  if (s == "car") return VehicleClass::car;
  if (s == "truck_bus") return VehicleClass::truck_bus;
  throw ConfigError("unknown vehicle class '" + std::string(s) + "'");
}

FuelType parse_fuel(std::string_view s) {
  if (s == "ice") return FuelType::ice;
  if (s == "ev") return FuelType::ev;
  throw ConfigError("unknown fuel type '" + std::string(s) + "'");
}

Turn parse_turn(std::string_view s) {
  if (s == "left") return Turn::left;
  if (s == "straight") return Turn::straight;
  if (s == "right") return Turn::right;
  throw ConfigError("unknown turn '" + std::string(s) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Rng make_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  const std::uint64_t tag = fnv1a64(purpose);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

double uniform01(Rng& rng) {
  // 53 high bits -> exactly representable doubles in [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_in(Rng& rng, double lo, double hi) {
  const double u = uniform01(rng);
  if (!(hi > lo)) return lo;
  return lo + (hi - lo) * u;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf.data(), ptr);
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), n));
  std::vector<std::exception_ptr> errors(n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace intersim
