#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intersim/controllers.hpp"
#include "intersim/env.hpp"

namespace intersim {

struct VehicleRecord {
  VehicleId id = 0;
  int approach = 0;
  bool controlled = false;
  std::int64_t arrival_step = 0;
  std::optional<std::int64_t> exit_step;
  double emission_g = 0.0;    // summed over every recorded step
  double travel_time_s = 0.0; // arrival to exit, or to the end of the episode
};

/// Outcome of one episode (or several merged episodes) after warmup.
/// `vehicles` holds only post-warmup entrants.
struct EpisodeMetrics {
  int approach_count = 0;
  std::vector<VehicleRecord> vehicles;
  std::vector<std::uint64_t> throughput;  // post-warmup exits per approach
  std::uint64_t spawned = 0;              // vehicles placed over the whole run
  double fleet_emission_g = 0.0;          // every vehicle, post-warmup steps
  double min_ttc = kInf;
  double mean_abs_accel = 0.0;
  double mean_jerk = 0.0;  // mean |delta a| / dt
  std::size_t episodes = 1;

  /// approach < 0 means the whole intersection.
  std::uint64_t total_throughput(int approach = -1) const;
  /// Mean emission over completed entrant trips; nullopt without any.
  std::optional<double> per_vehicle_emission(int approach = -1) const;
  std::size_t completed_trips(int approach = -1) const;
};

/// Sum over entrants of emission + lambda * travel time. Throws InvalidInput
/// for a negative or non-finite lambda.
double episode_cost(const EpisodeMetrics& m, double lambda);

/// Pools vehicles and throughput of paired-seed repetitions of one context.
EpisodeMetrics merge_metrics(const std::vector<EpisodeMetrics>& runs);

/// Collects EpisodeMetrics from the post-warmup steps of an episode.
class MetricsRecorder {
 public:
  MetricsRecorder(const ContextVector& ctx, const EmissionCoefficients& coefficients, const SimConfig& sim);

  /// `state` is the state right after the step that produced `events`.
  void record(const SimState& state, const StepEvents& events);
  EpisodeMetrics finish(const SimState& state) const;

 private:
  struct Open {
    VehicleRecord rec;
    bool entrant = false;
  };
  const ContextVector* ctx_;
  const EmissionCoefficients* coefficients_;
  SimConfig sim_;
  std::map<VehicleId, Open> open_;
  std::vector<VehicleRecord> done_;
  std::vector<std::uint64_t> throughput_;
  double fleet_emission_ = 0.0;
  double min_ttc_ = kInf;
  double abs_accel_sum_ = 0.0;
  double jerk_sum_ = 0.0;
  std::size_t samples_ = 0;
};

/// Runs one episode with `controller` for the CVs and returns its metrics.
/// An optional trace sink sees every step, warmup included.
EpisodeMetrics run_episode(const EpisodeSpec& spec, Controller& controller, const TraceSink& sink = {});

/// The same episode with adoption forced to zero: every vehicle human-driven.
EpisodeSpec baseline_spec(const EpisodeSpec& policy);

struct BenefitRecord {
  std::string context_id;
  int approach = -1;  // -1: whole intersection
  double emission_benefit_pct = 0.0;      // zeroing applied at this record's level
  double raw_emission_benefit_pct = 0.0;  // before any zeroing
  double throughput_change_pct = 0.0;
  bool zeroed = false;
  bool intersection_zeroed = false;            // intersection throughput fell
  double intersection_rule_benefit_pct = 0.0;  // zeroing applied at intersection level
  double baseline_g_per_vehicle = 0.0;
  double policy_g_per_vehicle = 0.0;
  std::uint64_t baseline_throughput = 0;
  std::uint64_t policy_throughput = 0;
  std::vector<std::uint64_t> seeds;
  bool skipped = false;
  std::string skip_reason;

  nlohmann::json to_json() const;
};

/// Emission and throughput change of `policy` against `baseline` for one
/// approach (or the intersection when approach < 0). Throws InvalidInput when
/// the baseline per-vehicle emission is zero or undefined.
BenefitRecord benefits(const EpisodeMetrics& policy, const EpisodeMetrics& baseline, int approach = -1);

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
  bool operator==(const HistogramBin&) const = default;
};

/// Bins aligned to multiples of `width`, contiguous from the lowest to the
/// highest occupied bin; [k*w, (k+1)*w). Throws InvalidInput for width <= 0
/// or a non-finite value.
std::vector<HistogramBin> histogram(const std::vector<double>& values, double width);

/// "bin_low,bin_high,count" rows with a header line.
std::string histogram_csv(const std::vector<HistogramBin>& bins);

}  // namespace intersim
