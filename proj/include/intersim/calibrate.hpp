#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intersim/idm.hpp"
#include "intersim/sim.hpp"
#include "intersim/trace.hpp"

namespace intersim {

/// One car-following observation: inputs at t and the speed at t + dt.
struct Transition {
  double gap = kInf;  // m, +inf for a free road
  double speed = 0.0;
  double speed_delta = 0.0;  // ego minus leader
  double next_speed = 0.0;
};

struct DriverTrajectory {
  std::string driver;
  VehicleClass vclass = VehicleClass::car;
  std::vector<Transition> transitions;
};

struct TrajectoryDataset {
  double dt = 0.5;
  std::vector<DriverTrajectory> drivers;

  std::size_t transition_count() const;
  /// Throws InvalidInput on dt <= 0, negative speeds or non-positive gaps.
  void validate() const;
  /// Only the drivers of one class.
  TrajectoryDataset of_class(VehicleClass c) const;
};

/// Car-following transitions of human drivers in a trace: consecutive rows of
/// one vehicle with a vehicle leader, no stop decision, a non-zero next speed
/// and an acceleration strictly inside `bounds`.
TrajectoryDataset dataset_from_trace(const Trace& trace, const AccelBounds& bounds = {});

inline constexpr std::size_t kThetaDim = 5;
inline constexpr std::size_t kCalibDim = 6;  // ln v0, ln s0, ln T, ln a, ln b, ln sigma_eps
using CalibPoint = std::array<double, kCalibDim>;

/// Log-normal prior over theta = [v0, s0, T, a, b] and sigma_eps.
struct CalibrationPrior {
  std::array<double, kThetaDim> mu0{};
  std::array<std::array<double, kThetaDim>, kThetaDim> sigma0{};
  double mu_eps = 0.0;
  double sigma1 = 0.5;  // standard deviation of ln sigma_eps

  /// ln[15, 2, 1.5, 1.5, 2], 0.25 I, ln 0.3, 0.5.
  static CalibrationPrior defaults();
  /// Throws ConfigError unless sigma0 is symmetric positive definite and sigma1 > 0.
  void validate() const;
  nlohmann::json to_json() const;
  static CalibrationPrior from_json(const nlohmann::json& j);
};

/// accel_exp stays at 4.
IdmParams params_from_log(const CalibPoint& x);
CalibPoint log_point(const IdmParams& p, double sigma_eps);

/// Gaussian log-density of next speeds around v + a_IDM * dt with standard
/// deviation sigma_eps * dt. Zero for an empty dataset.
double log_likelihood(const IdmParams& theta, double sigma_eps, const TrajectoryDataset& data);

/// Gradient of log_likelihood with respect to the log-space point.
CalibPoint log_likelihood_gradient(const CalibPoint& x, const TrajectoryDataset& data);

double log_prior(const CalibPoint& x, const CalibrationPrior& prior);
double log_posterior(const CalibPoint& x, const CalibrationPrior& prior, const TrajectoryDataset& data);

struct ChainConfig {
  int chains = 4;
  int burn_in = 2000;  // proposal covariance adapts here, then freezes
  int draws = 3000;    // kept per chain
  double init_jitter = 0.1;
  bool mala = false;  // gradient-informed proposal instead of random walk
  unsigned workers = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct PosteriorSample {
  int chains = 0;
  int draws_per_chain = 0;
  std::vector<CalibPoint> draws;  // chain-major, log space
  double acceptance_rate = 0.0;
  CalibPoint rhat{};  // split-chain potential scale reduction
  CalibPoint mcse{};  // batch-means standard error of the log-space mean

  CalibPoint log_mean() const;
  /// Posterior mean of each natural-scale component (v0, s0, T, a, b, sigma_eps).
  CalibPoint natural_mean() const;
  /// A uniformly chosen draw.
  IdmParams draw_params(Rng& rng) const;
};

/// Metropolis sampler in log space targeting prior x likelihood; chains run on
/// up to cfg.workers threads and depend only on `seed`. Throws ConfigError if
/// the posterior is not finite at the prior mean.
PosteriorSample sample_posterior(const CalibrationPrior& prior, const TrajectoryDataset& data, const ChainConfig& cfg,
                                 std::uint64_t seed);

/// Split-chain R-hat of one component.
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Batch-means Monte Carlo standard error of the mean of a concatenated series.
double batch_means_mcse(const std::vector<double>& series, std::size_t batches = 25);

struct ClassFit {
  std::optional<PosteriorSample> posterior;  // nullopt: no data, defaults used
  std::size_t transitions = 0;
};

struct PopulationFit {
  std::map<VehicleClass, ClassFit> classes;

  /// Driver pools of `pool_size` posterior draws per fitted class; classes
  /// without data keep the shipped lognormal defaults.
  DriverPopulation population(std::size_t pool_size, std::uint64_t seed) const;
};

/// One posterior per class present in `data`. A class with no transitions is
/// left unfitted.
PopulationFit fit_population(const TrajectoryDataset& data, const CalibrationPrior& prior, const ChainConfig& cfg,
                             std::uint64_t seed);

/// Calibration report: prior, chain configuration and per-class summaries.
nlohmann::json calibration_report(const PopulationFit& fit, const CalibrationPrior& prior, const ChainConfig& cfg,
                                  std::uint64_t seed);

/// Noisy car-following data from the generative model with known parameters:
/// half the drivers follow a leader with a scripted speed profile, the rest
/// start slow on a free road.
TrajectoryDataset synthetic_dataset(const IdmParams& theta, double sigma_eps, std::size_t transitions, double dt,
                                    std::uint64_t seed, VehicleClass vclass = VehicleClass::car);

}  // namespace intersim
