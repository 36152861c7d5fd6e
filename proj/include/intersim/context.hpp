#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intersim/common.hpp"
#include "intersim/emissions.hpp"
#include "intersim/sim.hpp"

namespace intersim {

/// Closed interval [lo, hi]; lo == hi is a point mass.
struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  bool within(const Range& outer) const { return lo >= outer.lo && hi <= outer.hi; }
  double sample(Rng& rng) const { return uniform_in(rng, lo, hi); }
  bool operator==(const Range&) const = default;
};

/// (lane count per approach, total phase count).
struct LaneSetup {
  int lane_count = 1;
  int phase_count = 1;
  bool operator==(const LaneSetup&) const = default;
};

/// Independent uniform feature ranges. Unset features are unconstrained: a
/// sampler falls back to the defaults below, and a holdout region ignores them.
struct FeatureDistribution {
  std::optional<std::vector<LaneSetup>> lane_setup;
  std::optional<Range> vehicle_inflow;     // veh/h, per approach
  std::optional<Range> green_phase_time;   // s, per phase
  std::optional<Range> red_phase_time;     // s, per phase (clearance after yellow)
  std::optional<Range> lane_length;        // m, per approach
  std::optional<Range> speed_limit;        // m/s, per approach
  std::optional<Range> signal_offset;      // s
  std::optional<Range> road_grade;         // percent, per approach
  std::optional<Range> yellow_time;        // s, per phase
  std::optional<Range> temperature;        // degC
  std::optional<Range> humidity;           // %RH
  std::optional<Range> adoption_level;
  std::optional<Range> ev_share;
  std::optional<Range> truck_bus_share;
  int approach_count = 2;
  bool upstream_gate = false;

  /// Throws ConfigError on empty or inverted ranges and infeasible setups.
  void validate() const;

  static FeatureDistribution from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

FeatureDistribution load_distribution(const std::filesystem::path& path);

struct ApproachContext {
  int lane_count = 1;
  double lane_length = 200.0;
  double speed_limit = 15.0;
  double road_grade = 0.0;
  double inflow_vph = 300.0;
  bool operator==(const ApproachContext&) const = default;
};

struct PhaseContext {
  double green_s = 30.0;
  double yellow_s = 3.0;
  double red_s = 2.0;
  std::vector<int> served_approaches;
  bool operator==(const PhaseContext&) const = default;
};

/// One context-MDP.
///
/// Observed by agents: lane_count, lane_length, speed_limit, the timing of the
/// phase serving the ego approach, temperature, humidity, fuel type, adoption
/// level. Unobserved: seed (arrivals, drivers, adoption draws), the offset,
/// inflows, grades, fleet shares.
struct ContextVector {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<ApproachContext> approaches;
  std::vector<PhaseContext> phases;
  double signal_offset = 0.0;
  double temperature = 20.0;
  double humidity = 50.0;
  double adoption_level = 0.0;
  double ev_share = 0.0;
  double truck_bus_share = 0.05;
  bool upstream_gate = false;

  int phase_count() const { return static_cast<int>(phases.size()); }

  IntersectionTopology topology() const;
  SignalPlan plan() const;
  /// Throws ConfigError when the context violates any invariant.
  void validate() const;
  bool operator==(const ContextVector&) const = default;
};

/// Scenario for the kernel. Stream seeds all derive from ctx.seed.
ScenarioSpec make_scenario(const ContextVector& ctx, const DriverPopulation& drivers = DriverPopulation::defaults());

/// Virtual upstream gate: same cycle as the plan, half green, shifted by the offset.
std::optional<SpawnGate> spawn_gate_for(const ContextVector& ctx);

EmissionContext emission_context(const ContextVector& ctx, int approach, VehicleClass vclass, FuelType fuel, int age_band);

/// Phase k serves every approach a with a % phase_count == k.
std::vector<std::vector<int>> round_robin_service(int approach_count, int phase_count);

/// Uniform independent draws. Infeasible draws are resampled up to 100 times.
ContextVector sample_context(const FeatureDistribution& dist, Rng& rng);

/// True iff every feature set in `region` holds for every approach and phase.
bool in_region(const ContextVector& ctx, const FeatureDistribution& region);

/// Controlled flags for n vehicles, each with probability `level`.
std::vector<bool> assign_adoption(std::size_t n, double level, Rng& rng);

/// Train/holdout samplers for a systematicity split.
class SystematicSplit {
 public:
  /// Throws ConfigError when test support is not inside train support or when
  /// the train complement is empty.
  SystematicSplit(FeatureDistribution train, FeatureDistribution test);

  /// Rejection sampler over train minus the holdout region (bounded attempts).
  ContextVector sample_train(Rng& rng) const;
  /// Draws inside the holdout region; features the holdout leaves unset come from train.
  ContextVector sample_test(Rng& rng) const;

  const FeatureDistribution& train() const { return train_; }
  const FeatureDistribution& test() const { return test_; }
  const FeatureDistribution& test_sampling() const { return test_sampling_; }

 private:
  FeatureDistribution train_;
  FeatureDistribution test_;
  FeatureDistribution test_sampling_;
};

SystematicSplit split_systematicity(const FeatureDistribution& train, const FeatureDistribution& test);

// Dataset files: JSON lines. The first line is the header
// {"format":"intersim-dataset","version":1}; every further non-empty line is
// one context record.

nlohmann::json context_to_json(const ContextVector& ctx);
/// Throws ParseError naming `line` and the offending field.
ContextVector context_from_json(const nlohmann::json& j, std::size_t line);

std::string dataset_text(const std::vector<ContextVector>& contexts);
std::vector<ContextVector> parse_dataset(const std::string& text);
void save_dataset(const std::vector<ContextVector>& contexts, const std::filesystem::path& path);
/// An empty file is an empty dataset.
std::vector<ContextVector> load_dataset(const std::filesystem::path& path);

}  // namespace intersim
