#include "intersim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace intersim {

using nlohmann::json;

std::uint64_t EpisodeMetrics::total_throughput(int approach) const {
  if (approach >= 0) return throughput.at(static_cast<std::size_t>(approach));
  std::uint64_t n = 0;
  for (std::uint64_t t : throughput) n += t;
  return n;
}

std::size_t EpisodeMetrics::completed_trips(int approach) const {
  return static_cast<std::size_t>(std::count_if(vehicles.begin(), vehicles.end(), [approach](const VehicleRecord& r) {
    return r.exit_step && (approach < 0 || r.approach == approach);
  }));
}

std::optional<double> EpisodeMetrics::per_vehicle_emission(int approach) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const VehicleRecord& r : vehicles) {
    if (!r.exit_step || (approach >= 0 && r.approach != approach)) continue;
    sum += r.emission_g;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double episode_cost(const EpisodeMetrics& m, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("episode_cost: lambda must be finite and >= 0");
  double j = 0.0;
  for (const VehicleRecord& r : m.vehicles) j += r.emission_g + lambda * r.travel_time_s;
  return j;
}

EpisodeMetrics merge_metrics(const std::vector<EpisodeMetrics>& runs) {
  if (runs.empty()) throw InvalidInput("merge_metrics: no runs");
  EpisodeMetrics out;
  out.approach_count = runs.front().approach_count;
  out.throughput.assign(static_cast<std::size_t>(out.approach_count), 0);
  out.episodes = 0;
  double accel_w = 0.0;
  double jerk_w = 0.0;
  for (const EpisodeMetrics& m : runs) {
    if (m.approach_count != out.approach_count) throw InvalidInput("merge_metrics: approach counts differ");
    out.vehicles.insert(out.vehicles.end(), m.vehicles.begin(), m.vehicles.end());
    for (std::size_t a = 0; a < out.throughput.size(); ++a) out.throughput[a] += m.throughput[a];
    out.spawned += m.spawned;
    out.fleet_emission_g += m.fleet_emission_g;
    out.min_ttc = std::min(out.min_ttc, m.min_ttc);
    accel_w += m.mean_abs_accel;
    jerk_w += m.mean_jerk;
    out.episodes += m.episodes;
  }
  out.mean_abs_accel = accel_w / static_cast<double>(runs.size());
  out.mean_jerk = jerk_w / static_cast<double>(runs.size());
  return out;
}

MetricsRecorder::MetricsRecorder(const ContextVector& ctx, const EmissionCoefficients& coefficients,
                                 const SimConfig& sim)
    : ctx_(&ctx), coefficients_(&coefficients), sim_(sim), throughput_(ctx.approaches.size(), 0) {}

void MetricsRecorder::record(const SimState& state, const StepEvents& events) {
  for (const VehicleSample& s : events.samples) {
    const double e = sample_emission_g(s, *ctx_, *coefficients_, sim_.dt);
    fleet_emission_ += e;
    abs_accel_sum_ += std::abs(s.accel);
    jerk_sum_ += std::abs(s.accel - s.accel_prev) / sim_.dt;
    ++samples_;
    auto it = open_.find(s.id);
    if (it == open_.end()) {
      Open o;
      o.rec.id = s.id;
      o.rec.approach = s.approach;
      const auto v = state.vehicles.find(s.id);
      if (v != state.vehicles.end()) {
        o.rec.arrival_step = v->second.arrival_step;
        o.entrant = v->second.arrival_step >= sim_.warmup;
      }
      it = open_.emplace(s.id, o).first;
    }
    it->second.rec.controlled = s.controlled;
    it->second.rec.emission_g += e;
  }
  for (const ExitRecord& x : events.exited) {
    if (x.exit_step >= sim_.warmup) ++throughput_.at(static_cast<std::size_t>(x.approach));
    const auto it = open_.find(x.id);
    if (it == open_.end()) continue;
    if (it->second.entrant) {
      VehicleRecord r = it->second.rec;
      r.exit_step = x.exit_step;
      r.travel_time_s = static_cast<double>(x.exit_step - x.arrival_step) * sim_.dt;
      done_.push_back(r);
    }
    open_.erase(it);
  }
  min_ttc_ = std::min(min_ttc_, fleet_min_ttc(state));
}

EpisodeMetrics MetricsRecorder::finish(const SimState& state) const {
  EpisodeMetrics m;
  m.approach_count = static_cast<int>(ctx_->approaches.size());
  m.vehicles = done_;
  for (const auto& [id, o] : open_) {
    if (!o.entrant) continue;
    VehicleRecord r = o.rec;
    r.travel_time_s = static_cast<double>(state.step - r.arrival_step) * sim_.dt;
    m.vehicles.push_back(r);
  }
  for (const auto& queue : state.pending) {
    for (const VehicleState& v : queue) {
      if (v.arrival_step < sim_.warmup) continue;
      VehicleRecord r;
      r.id = v.id;
      r.approach = v.approach;
      r.controlled = v.controlled;
      r.arrival_step = v.arrival_step;
      r.travel_time_s = static_cast<double>(state.step - v.arrival_step) * sim_.dt;
      m.vehicles.push_back(r);
    }
  }
  std::sort(m.vehicles.begin(), m.vehicles.end(),
            [](const VehicleRecord& a, const VehicleRecord& b) { return a.id < b.id; });
  m.throughput = throughput_;
  m.spawned = state.spawned;
  m.fleet_emission_g = fleet_emission_;
  m.min_ttc = min_ttc_;
  if (samples_ > 0) {
    m.mean_abs_accel = abs_accel_sum_ / static_cast<double>(samples_);
    m.mean_jerk = jerk_sum_ / static_cast<double>(samples_);
  }
  return m;
}

EpisodeMetrics run_episode(const EpisodeSpec& spec, Controller& controller, const TraceSink& sink) {
  Environment env(spec);
  if (sink) env.set_trace_sink(sink);
  controller.reset(spec.seed);
  ObservationMap obs = env.reset();
  MetricsRecorder recorder(env.spec().context, env.spec().coefficients, env.spec().sim);
  while (!env.done()) {
    StepResult r = env.step(decide(controller, env, obs));
    recorder.record(env.state(), r.events);
    obs = std::move(r.observations);
  }
  return recorder.finish(env.state());
}

EpisodeSpec baseline_spec(const EpisodeSpec& policy) {
  EpisodeSpec b = policy;
  b.context.adoption_level = 0.0;
  b.controller = "baseline";
  return b;
}

namespace {

double pct_change(double from, double to) {
  if (from == 0.0) return to == 0.0 ? 0.0 : 100.0;
  return 100.0 * (to - from) / from;
}

}  // namespace

BenefitRecord benefits(const EpisodeMetrics& policy, const EpisodeMetrics& baseline, int approach) {
  const std::optional<double> base = baseline.per_vehicle_emission(approach);
  if (!base || *base == 0.0) throw InvalidInput("baseline per-vehicle emission is zero or undefined");
  const std::optional<double> pol = policy.per_vehicle_emission(approach);
  if (!pol) throw InvalidInput("policy run completed no trips");

  BenefitRecord r;
  r.approach = approach;
  r.baseline_g_per_vehicle = *base;
  r.policy_g_per_vehicle = *pol;
  r.raw_emission_benefit_pct = 100.0 * (*base - *pol) / *base;
  r.baseline_throughput = baseline.total_throughput(approach);
  r.policy_throughput = policy.total_throughput(approach);
  r.throughput_change_pct =
      pct_change(static_cast<double>(r.baseline_throughput), static_cast<double>(r.policy_throughput));
  r.zeroed = r.policy_throughput < r.baseline_throughput;
  r.emission_benefit_pct = r.zeroed ? 0.0 : r.raw_emission_benefit_pct;
  r.intersection_zeroed = policy.total_throughput() < baseline.total_throughput();
  r.intersection_rule_benefit_pct = r.intersection_zeroed ? 0.0 : r.raw_emission_benefit_pct;
  return r;
}

json BenefitRecord::to_json() const {
  json j;
  j["context_id"] = context_id;
  j["approach"] = approach;
  j["skipped"] = skipped;
  if (skipped) {
    j["skip_reason"] = skip_reason;
  } else {
    j["emission_benefit_pct"] = emission_benefit_pct;
    j["raw_emission_benefit_pct"] = raw_emission_benefit_pct;
    j["throughput_change_pct"] = throughput_change_pct;
    j["zeroed"] = zeroed;
    j["intersection_zeroed"] = intersection_zeroed;
    j["intersection_rule_benefit_pct"] = intersection_rule_benefit_pct;
    j["baseline_g_per_vehicle"] = baseline_g_per_vehicle;
    j["policy_g_per_vehicle"] = policy_g_per_vehicle;
    j["baseline_throughput"] = baseline_throughput;
    j["policy_throughput"] = policy_throughput;
  }
  j["seeds"] = seeds;
  return j;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw InvalidInput("histogram: bin width must be positive");
  if (values.empty()) return {};
  std::map<long long, std::size_t> counts;
  for (double x : values) {
    if (!std::isfinite(x)) throw InvalidInput("histogram: non-finite value");
    ++counts[static_cast<long long>(std::floor(x / width))];
  }
  std::vector<HistogramBin> bins;
  for (long long k = counts.begin()->first; k <= counts.rbegin()->first; ++k) {
    const auto it = counts.find(k);
    bins.push_back({static_cast<double>(k) * width, static_cast<double>(k + 1) * width,
                    it == counts.end() ? 0 : it->second});
  }
  return bins;
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream out;
  out << "bin_low,bin_high,count\n";
  for (const HistogramBin& b : bins) out << format_double(b.low) << ',' << format_double(b.high) << ',' << b.count << '\n';
  return out.str();
}

}  // namespace intersim
