#include "intersim/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace intersim {

using nlohmann::json;

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // ln sqrt(2 pi)

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

double normal01(Rng& rng) {
  // Box-Muller on the library's own uniform draws keeps streams portable.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec6 to_vec(const CalibPoint& x) {
  Vec6 v;
  for (std::size_t i = 0; i < kCalibDim; ++i) v(static_cast<Eigen::Index>(i)) = x[i];
  return v;
}

CalibPoint to_point(const Vec6& v) {
  CalibPoint x{};
  for (std::size_t i = 0; i < kCalibDim; ++i) x[i] = v(static_cast<Eigen::Index>(i));
  return x;
}

Mat5 sigma0_matrix(const CalibrationPrior& p) {
  Mat5 m;
  for (std::size_t i = 0; i < kThetaDim; ++i) {
    for (std::size_t j = 0; j < kThetaDim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p.sigma0[i][j];
  }
  return m;
}

/// Prior precision and log normaliser, computed once per sampler run.
struct PriorCache {
  Vec5 mu;
  Mat5 precision;
  double log_norm = 0.0;
  double mu_eps = 0.0;
  double sigma1 = 1.0;

  explicit PriorCache(const CalibrationPrior& p) : mu_eps(p.mu_eps), sigma1(p.sigma1) {
    for (std::size_t i = 0; i < kThetaDim; ++i) mu(static_cast<Eigen::Index>(i)) = p.mu0[i];
    const Eigen::LLT<Mat5> llt(sigma0_matrix(p));
    precision = llt.solve(Mat5::Identity());
    const Mat5 l = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) log_det += 2.0 * std::log(l(i, i));
    log_norm = -5.0 * kLogSqrt2Pi - 0.5 * log_det - kLogSqrt2Pi - std::log(sigma1);
  }

  double log_density(const CalibPoint& x) const {
    Vec5 d;
    for (std::size_t i = 0; i < kThetaDim; ++i) d(static_cast<Eigen::Index>(i)) = x[i] - mu(static_cast<Eigen::Index>(i));
    const double z = (x[5] - mu_eps) / sigma1;
    return log_norm - 0.5 * d.dot(precision * d) - 0.5 * z * z;
  }

  Vec6 gradient(const CalibPoint& x) const {
    Vec5 d;
    for (std::size_t i = 0; i < kThetaDim; ++i) d(static_cast<Eigen::Index>(i)) = x[i] - mu(static_cast<Eigen::Index>(i));
    const Vec5 g = -(precision * d);
    Vec6 out;
    out.head<5>() = g;
    out(5) = -(x[5] - mu_eps) / (sigma1 * sigma1);
    return out;
  }
};

bool finite_point(const CalibPoint& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

std::size_t TrajectoryDataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& d : drivers) n += d.transitions.size();
  return n;
}

void TrajectoryDataset::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("trajectory dataset: dt must be positive");
  for (const auto& d : drivers) {
    for (const Transition& t : d.transitions) {
      if (!(t.speed >= 0.0) || !std::isfinite(t.speed) || !std::isfinite(t.next_speed))
        throw InvalidInput("trajectory dataset: speeds must be finite and non-negative (driver " + d.driver + ")");
      if (!(t.gap > 0.0) || std::isnan(t.gap)) throw InvalidInput("trajectory dataset: gaps must be positive (driver " + d.driver + ")");
      if (!std::isfinite(t.speed_delta)) throw InvalidInput("trajectory dataset: non-finite speed delta (driver " + d.driver + ")");
    }
  }
}

TrajectoryDataset TrajectoryDataset::of_class(VehicleClass c) const {
  TrajectoryDataset out;
  out.dt = dt;
  for (const auto& d : drivers) {
    if (d.vclass == c) out.drivers.push_back(d);
  }
  return out;
}

TrajectoryDataset dataset_from_trace(const Trace& trace, const AccelBounds& bounds) {
  std::map<std::pair<std::string, VehicleId>, std::vector<const TraceRow*>> by_vehicle;
  for (const TraceRow& r : trace.rows) by_vehicle[{r.scenario_id, r.vehicle_id}].push_back(&r);

  TrajectoryDataset data;
  data.dt = trace.dt;
  for (auto& [key, rows] : by_vehicle) {
    std::sort(rows.begin(), rows.end(), [](const TraceRow* a, const TraceRow* b) { return a->step < b->step; });
    DriverTrajectory d;
    d.driver = key.first + ":" + std::to_string(key.second);
    d.vclass = rows.front()->vclass;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      const TraceRow& r = *rows[i];
      const TraceRow& next = *rows[i + 1];
      if (next.step != r.step + 1 || r.controlled || !r.leader_id || r.decision == SignalDecision::stop) continue;
      if (!(r.accel > bounds.min && r.accel < bounds.max) || next.speed <= 0.0 || !(r.leader_gap > 0.0)) continue;
      d.transitions.push_back({r.leader_gap, r.speed, r.speed - r.leader_speed, next.speed});
    }
    if (!d.transitions.empty()) data.drivers.push_back(std::move(d));
  }
  return data;
}

CalibrationPrior CalibrationPrior::defaults() {
  CalibrationPrior p;
  const std::array<double, kThetaDim> centre{15.0, 2.0, 1.5, 1.5, 2.0};
  for (std::size_t i = 0; i < kThetaDim; ++i) {
    p.mu0[i] = std::log(centre[i]);
    p.sigma0[i][i] = 0.25;
  }
  p.mu_eps = std::log(0.3);
  p.sigma1 = 0.5;
  return p;
}

void CalibrationPrior::validate() const {
  for (double m : mu0) {
    if (!std::isfinite(m)) throw ConfigError("prior: mu0 must be finite");
  }
  if (!std::isfinite(mu_eps)) throw ConfigError("prior: mu_eps must be finite");
  if (!(sigma1 > 0.0) || !std::isfinite(sigma1)) throw ConfigError("prior: sigma1 must be positive");
  const Mat5 s = sigma0_matrix(*this);
  if (!s.allFinite()) throw ConfigError("prior: sigma0 must be finite");
  if (!s.isApprox(s.transpose(), 1e-12)) throw ConfigError("prior: sigma0 must be symmetric");
  const Eigen::LLT<Mat5> llt(s);
  if (llt.info() != Eigen::Success) throw ConfigError("prior: sigma0 must be positive definite");
}

json CalibrationPrior::to_json() const {
  json s = json::array();
  for (const auto& row : sigma0) s.push_back(row);
  return {{"mu0", mu0}, {"sigma0", s}, {"mu_eps", mu_eps}, {"sigma1", sigma1}};
}

CalibrationPrior CalibrationPrior::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("prior: expected an object");
  for (const auto& [k, v] : j.items()) {
    if (k != "mu0" && k != "sigma0" && k != "mu_eps" && k != "sigma1") throw ConfigError("prior: unknown key '" + k + "'");
  }
  CalibrationPrior p = defaults();
  try {
    if (j.contains("mu0")) p.mu0 = j.at("mu0").get<std::array<double, kThetaDim>>();
    if (j.contains("sigma0")) p.sigma0 = j.at("sigma0").get<std::array<std::array<double, kThetaDim>, kThetaDim>>();
    if (j.contains("mu_eps")) p.mu_eps = j.at("mu_eps").get<double>();
    if (j.contains("sigma1")) p.sigma1 = j.at("sigma1").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
  p.validate();
  return p;
}

IdmParams params_from_log(const CalibPoint& x) {
  IdmParams p;
  p.v_desired = std::exp(x[0]);
  p.gap_min = std::exp(x[1]);
  p.headway_time = std::exp(x[2]);
  p.accel_max = std::exp(x[3]);
  p.decel_comf = std::exp(x[4]);
  return p;
}

CalibPoint log_point(const IdmParams& p, double sigma_eps) {
  return {std::log(p.v_desired), std::log(p.gap_min), std::log(p.headway_time), std::log(p.accel_max),
          std::log(p.decel_comf), std::log(sigma_eps)};
}

double log_likelihood(const IdmParams& theta, double sigma_eps, const TrajectoryDataset& data) {
  theta.validate();
  if (!(sigma_eps > 0.0) || !std::isfinite(sigma_eps)) throw InvalidInput("sigma_eps must be positive");
  const double sd = sigma_eps * data.dt;
  const double norm = -std::log(sd) - kLogSqrt2Pi;
  double ll = 0.0;
  for (const auto& d : data.drivers) {
    for (const Transition& t : d.transitions) {
      const double pred = t.speed + idm_acceleration(t.speed, t.gap, t.speed_delta, theta) * data.dt;
      const double z = (t.next_speed - pred) / sd;
      ll += norm - 0.5 * z * z;
    }
  }
  return ll;
}

CalibPoint log_likelihood_gradient(const CalibPoint& x, const TrajectoryDataset& data) {
  const IdmParams p = params_from_log(x);
  const double sigma = std::exp(x[5]);
  const double dt = data.dt;
  const double var = sigma * sigma * dt * dt;
  CalibPoint g{};
  for (const auto& d : data.drivers) {
    for (const Transition& t : d.transitions) {
      const double v = t.speed;
      const double free_term = std::pow(v / p.v_desired, p.accel_exp);
      const double root = std::sqrt(p.accel_max * p.decel_comf);
      const double brake = v * t.speed_delta / (2.0 * root);
      const double dynamic = v * p.headway_time + brake;
      double da[5] = {p.accel_max * p.accel_exp * free_term, 0.0, 0.0, 0.0, 0.0};
      double interaction = 0.0;
      if (std::isfinite(t.gap)) {
        const double s_star = p.gap_min + std::max(0.0, dynamic);
        interaction = (s_star / t.gap) * (s_star / t.gap);
        const double k = -2.0 * p.accel_max * s_star / (t.gap * t.gap);  // da / ds*
        da[1] = k * p.gap_min;
        if (dynamic > 0.0) {
          da[2] = k * v * p.headway_time;
          da[3] = k * (-0.5 * brake);
          da[4] = k * (-0.5 * brake);
        }
      }
      const double a = p.accel_max * (1.0 - free_term - interaction);
      da[3] += a;
      const double r = t.next_speed - (v + a * dt);
      for (std::size_t i = 0; i < kThetaDim; ++i) g[i] += r / var * dt * da[i];
      g[5] += -1.0 + r * r / var;
    }
  }
  return g;
}

double log_prior(const CalibPoint& x, const CalibrationPrior& prior) {
  return PriorCache(prior).log_density(x);
}

double log_posterior(const CalibPoint& x, const CalibrationPrior& prior, const TrajectoryDataset& data) {
  if (!finite_point(x)) return -kInf;
  return log_prior(x, prior) + log_likelihood(params_from_log(x), std::exp(x[5]), data);
}

void ChainConfig::validate() const {
  if (chains < 2) throw ConfigError("chains must be >= 2 for split R-hat");
  if (burn_in < 100) throw ConfigError("burn_in must be >= 100");
  if (draws < 100) throw ConfigError("draws must be >= 100");
  if (!(init_jitter >= 0.0)) throw ConfigError("init_jitter must be >= 0");
}

json ChainConfig::to_json() const {
  return {{"chains", chains}, {"burn_in", burn_in}, {"draws", draws}, {"init_jitter", init_jitter},
          {"proposal", mala ? "mala" : "random_walk"}};
}

CalibPoint PosteriorSample::log_mean() const {
  CalibPoint m{};
  for (const CalibPoint& d : draws) {
    for (std::size_t i = 0; i < kCalibDim; ++i) m[i] += d[i];
  }
  for (double& v : m) v /= static_cast<double>(draws.size());
  return m;
}

CalibPoint PosteriorSample::natural_mean() const {
  CalibPoint m{};
  for (const CalibPoint& d : draws) {
    for (std::size_t i = 0; i < kCalibDim; ++i) m[i] += std::exp(d[i]);
  }
  for (double& v : m) v /= static_cast<double>(draws.size());
  return m;
}

IdmParams PosteriorSample::draw_params(Rng& rng) const {
  if (draws.empty()) throw InvalidInput("posterior has no draws");
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(draws.size()));
  return params_from_log(draws[std::min(i, draws.size() - 1)]);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw InvalidInput("split_rhat: chains are too short");
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  const double n = static_cast<double>(halves.front().size());
  const double m = static_cast<double>(halves.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    double mu = 0.0;
    for (double v : h) mu += v;
    mu /= n;
    double s2 = 0.0;
    for (double v : h) s2 += (v - mu) * (v - mu);
    w += s2 / (n - 1.0);
    means.push_back(mu);
  }
  w /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  if (w == 0.0) return b == 0.0 ? 1.0 : kInf;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double batch_means_mcse(const std::vector<double>& series, std::size_t batches) {
  if (batches < 2 || series.size() < batches) throw InvalidInput("batch_means_mcse: too few samples");
  const std::size_t size = series.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) s += series[i];
    means.push_back(s / static_cast<double>(size));
  }
  double mu = 0.0;
  for (double x : means) mu += x;
  mu /= static_cast<double>(batches);
  double var = 0.0;
  for (double x : means) var += (x - mu) * (x - mu);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

namespace {

struct ChainResult {
  std::vector<CalibPoint> draws;
  std::size_t accepted = 0;
};

class Target {
 public:
  Target(const CalibrationPrior& prior, const TrajectoryDataset& data) : prior_(prior), data_(&data) {}

  double log_density(const CalibPoint& x) const {
    if (!finite_point(x)) return -kInf;
    const double lp = prior_.log_density(x);
    if (data_->transition_count() == 0) return lp;
    return lp + log_likelihood(params_from_log(x), std::exp(x[5]), *data_);
  }

  Vec6 gradient(const CalibPoint& x) const {
    return prior_.gradient(x) + to_vec(log_likelihood_gradient(x, *data_));
  }

 private:
  PriorCache prior_;
  const TrajectoryDataset* data_;
};

ChainResult run_chain(const Target& target, const CalibrationPrior& prior, const ChainConfig& cfg, Rng rng) {
  Vec6 x;
  for (std::size_t i = 0; i < kThetaDim; ++i) x(static_cast<Eigen::Index>(i)) = prior.mu0[i];
  x(5) = prior.mu_eps;
  for (Eigen::Index i = 0; i < 6; ++i) x(i) += cfg.init_jitter * normal01(rng);
  double lp = target.log_density(to_point(x));

  // Proposal covariance starts at the prior scale and adapts during burn-in.
  Mat6 cov = Mat6::Zero();
  const Mat5 s0 = sigma0_matrix(prior);
  cov.topLeftCorner<5, 5>() = s0;
  cov(5, 5) = prior.sigma1 * prior.sigma1;
  Mat6 chol = cov.llt().matrixL();
  double log_scale = std::log(cfg.mala ? 0.5 : 2.38 / std::sqrt(6.0));
  const double target_rate = cfg.mala ? 0.57 : 0.3;

  Vec6 mean = x;
  Mat6 scatter = Mat6::Zero();
  std::size_t seen = 1;

  ChainResult out;
  out.draws.reserve(static_cast<std::size_t>(cfg.draws));
  const int total = cfg.burn_in + cfg.draws;
  for (int it = 0; it < total; ++it) {
    const double h = std::exp(log_scale);
    Vec6 z;
    for (Eigen::Index i = 0; i < 6; ++i) z(i) = normal01(rng);
    Vec6 y;
    double log_q = 0.0;  // log q(x | y) - log q(y | x)
    double lp_y = -kInf;
    if (cfg.mala) {
      const Mat6 pre = chol * chol.transpose();
      const Vec6 gx = target.gradient(to_point(x));
      y = x + 0.5 * h * h * pre * gx + h * chol * z;
      lp_y = target.log_density(to_point(y));
      if (std::isfinite(lp_y)) {
        const Vec6 gy = target.gradient(to_point(y));
        const auto lower = chol.triangularView<Eigen::Lower>();
        const Vec6 fwd = lower.solve(Vec6(y - x - 0.5 * h * h * pre * gx)) / h;
        const Vec6 bwd = lower.solve(Vec6(x - y - 0.5 * h * h * pre * gy)) / h;
        log_q = -0.5 * bwd.squaredNorm() + 0.5 * fwd.squaredNorm();
      }
    } else {
      y = x + h * chol * z;
      lp_y = target.log_density(to_point(y));
    }
    const double log_alpha = std::isfinite(lp_y) ? lp_y - lp + log_q : -kInf;
    const bool accept = std::log(1.0 - uniform01(rng)) < log_alpha;
    if (accept) {
      x = y;
      lp = lp_y;
    }

    if (it < cfg.burn_in) {
      const double rate = std::isfinite(log_alpha) ? std::min(1.0, std::exp(log_alpha)) : 0.0;
      log_scale += (rate - target_rate) / std::pow(static_cast<double>(it) + 1.0, 0.6);
      ++seen;
      const Vec6 delta = x - mean;
      mean += delta / static_cast<double>(seen);
      scatter += delta * (x - mean).transpose();
      if (it >= 200 && it % 50 == 0) {
        const Mat6 emp = scatter / static_cast<double>(seen - 1) + 1e-10 * Mat6::Identity();
        const Eigen::LLT<Mat6> llt(emp);
        if (llt.info() == Eigen::Success) chol = llt.matrixL();
      }
    } else {
      out.accepted += accept ? 1 : 0;
      out.draws.push_back(to_point(x));
    }
  }
  return out;
}

}  // namespace

PosteriorSample sample_posterior(const CalibrationPrior& prior, const TrajectoryDataset& data, const ChainConfig& cfg,
                                 std::uint64_t seed) {
  prior.validate();
  cfg.validate();
  data.validate();
  const Target target(prior, data);
  CalibPoint centre{};
  for (std::size_t i = 0; i < kThetaDim; ++i) centre[i] = prior.mu0[i];
  centre[5] = prior.mu_eps;
  if (!std::isfinite(target.log_density(centre)))
    throw ConfigError("posterior is not finite at the prior mean; check the prior against the data");

  std::vector<ChainResult> chains(static_cast<std::size_t>(cfg.chains));
  parallel_for(chains.size(), cfg.workers, [&](std::size_t c) {
    chains[c] = run_chain(target, prior, cfg, make_stream(seed, "calibrate-chain", c));
  });

  PosteriorSample out;
  out.chains = cfg.chains;
  out.draws_per_chain = cfg.draws;
  std::size_t accepted = 0;
  for (const ChainResult& c : chains) {
    out.draws.insert(out.draws.end(), c.draws.begin(), c.draws.end());
    accepted += c.accepted;
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(out.draws.size());
  for (std::size_t k = 0; k < kCalibDim; ++k) {
    std::vector<std::vector<double>> series;
    double se2 = 0.0;
    for (const ChainResult& c : chains) {
      std::vector<double> s;
      s.reserve(c.draws.size());
      for (const CalibPoint& d : c.draws) s.push_back(d[k]);
      const double se = batch_means_mcse(s);
      se2 += se * se;
      series.push_back(std::move(s));
    }
    out.rhat[k] = split_rhat(series);
    out.mcse[k] = std::sqrt(se2) / static_cast<double>(chains.size());
  }
  return out;
}

DriverPopulation PopulationFit::population(std::size_t pool_size, std::uint64_t seed) const {
  DriverPopulation pop = DriverPopulation::defaults();
  for (const auto& [c, fit] : classes) {
    if (!fit.posterior) continue;
    Rng rng = make_stream(seed, "driver-pool", static_cast<std::uint64_t>(c));
    auto& pool = pop.of(c).pool;
    pool.clear();
    for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(fit.posterior->draw_params(rng));
  }
  return pop;
}

PopulationFit fit_population(const TrajectoryDataset& data, const CalibrationPrior& prior, const ChainConfig& cfg,
                             std::uint64_t seed) {
  PopulationFit fit;
  for (VehicleClass c : {VehicleClass::car, VehicleClass::truck_bus}) {
    const TrajectoryDataset part = data.of_class(c);
    ClassFit cf;
    cf.transitions = part.transition_count();
    if (cf.transitions > 0) cf.posterior = sample_posterior(prior, part, cfg, mix_seed(seed, static_cast<std::uint64_t>(c)));
    fit.classes[c] = std::move(cf);
  }
  return fit;
}

json calibration_report(const PopulationFit& fit, const CalibrationPrior& prior, const ChainConfig& cfg,
                        std::uint64_t seed) {
  static const char* names[kCalibDim] = {"v_desired", "gap_min", "headway_time", "accel_max", "decel_comf", "sigma_eps"};
  json classes = json::object();
  for (const auto& [c, f] : fit.classes) {
    json j{{"transitions", f.transitions}, {"fitted", f.posterior.has_value()}};
    if (!f.posterior) {
      j["note"] = "no transitions; shipped default drivers are used";
    } else {
      const PosteriorSample& p = *f.posterior;
      const CalibPoint lm = p.log_mean();
      const CalibPoint nm = p.natural_mean();
      json params = json::object();
      for (std::size_t k = 0; k < kCalibDim; ++k) {
        params[names[k]] = {{"mean", nm[k]}, {"log_mean", lm[k]}, {"log_mcse", p.mcse[k]}, {"split_rhat", p.rhat[k]}};
      }
      j["acceptance_rate"] = p.acceptance_rate;
      j["draws"] = p.draws.size();
      j["parameters"] = params;
    }
    classes[std::string(to_string(c))] = j;
  }
  return {{"format", "intersim-calibration-report"},
          {"version", 1},
          {"seed", seed},
          {"prior", prior.to_json()},
          {"chain", cfg.to_json()},
          {"classes", classes}};
}

TrajectoryDataset synthetic_dataset(const IdmParams& theta, double sigma_eps, std::size_t transitions, double dt,
                                    std::uint64_t seed, VehicleClass vclass) {
  theta.validate();
  if (!(sigma_eps >= 0.0)) throw InvalidInput("sigma_eps must be non-negative");
  constexpr std::size_t kPerDriver = 250;
  constexpr double kLeaderLength = 5.0;
  TrajectoryDataset data;
  data.dt = dt;
  Rng rng = make_stream(seed, "synthetic-trajectories");
  for (std::size_t d = 0; data.transition_count() < transitions; ++d) {
    DriverTrajectory traj;
    traj.driver = "synthetic-" + std::to_string(d);
    traj.vclass = vclass;
    const std::size_t n = std::min(kPerDriver, transitions - data.transition_count());
    const bool follows = d % 2 == 0;
    double v = follows ? uniform_in(rng, 6.0, 12.0) : uniform_in(rng, 0.0, 4.0);
    double x = 0.0;
    const double base = uniform_in(rng, 7.0, 12.0);
    const double amp = uniform_in(rng, 2.0, 5.0);
    const double period = uniform_in(rng, 20.0, 40.0);
    const double phase = uniform_in(rng, 0.0, 2.0 * std::numbers::pi);
    auto leader_speed = [&](double t) { return base + amp * std::sin(2.0 * std::numbers::pi * t / period + phase); };
    double xl = follows ? (theta.gap_min + v * theta.headway_time + kLeaderLength + uniform_in(rng, 0.0, 10.0)) : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double vl = leader_speed(t);
      const double gap = follows ? xl - kLeaderLength - x : kInf;
      const double dv = follows ? v - vl : 0.0;
      const double a = idm_acceleration(v, gap, dv, theta);
      const double v_next = v + a * dt + sigma_eps * dt * normal01(rng);
      traj.transitions.push_back({gap, v, dv, v_next});
      x += step_displacement(v, std::max(0.0, v_next), dt);
      xl += step_displacement(vl, leader_speed(t + dt), dt);
      v = std::max(0.0, v_next);
    }
    data.drivers.push_back(std::move(traj));
  }
  return data;
}

}  // namespace intersim
