#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "intersim/calibrate.hpp"
#include "intersim/campaign.hpp"
#include "intersim/context.hpp"
#include "intersim/controllers.hpp"
#include "intersim/io.hpp"
#include "intersim/metrics.hpp"
#include "intersim/signal_opt.hpp"
#include "intersim/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace intersim;

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  unsigned workers = 0;
  bool force = false;
  bool verbose = false;
  // subcommand specific
  std::size_t count = 100;
  std::string holdout;
  bool trace = false;
  std::optional<double> bins;
};

/// Output directory of one run; records every file for the manifest.
class RunDir {
 public:
  RunDir(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

  /// Refuses to run when any planned output exists, unless forced.
  void claim(const std::vector<std::string>& names) const {
    std::vector<std::string> all = names;
    all.push_back("manifest.json");
    for (const auto& n : all) {
      if (fs::exists(dir_ / n) && !force_)
        throw Error("refusing to overwrite " + (dir_ / n).string() + " (pass --force)");
    }
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& bytes) {
    write_file(dir_ / name, bytes);
    outputs_.push_back({{"path", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }

  void input(const fs::path& path) {
    inputs_.push_back({{"path", path.string()}, {"sha256", sha256_hex(read_file(path))}});
  }

  void manifest(const std::string& command, const Options& o, const std::vector<std::string>& argv, json extra,
                double runtime_s) {
    json m{{"format", "intersim-manifest"},
           {"version", 1},
           {"tool_version", kVersion},
           {"command", command},
           {"argv", argv},
           {"seed", o.seed},
           {"workers", resolve_workers(o.workers)},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"details", std::move(extra)},
           {"runtime_s", runtime_s}};
    write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  bool force_;
  json inputs_ = json::array();
  json outputs_ = json::array();
};

std::string context_id(std::size_t i) {
  std::ostringstream s;
  s << "ctx-" << std::setw(5) << std::setfill('0') << i;
  return s.str();
}

json run_generate(const Options& o, RunDir& run) {
  run.claim({"contexts.jsonl"});
  run.input(o.config);
  const FeatureDistribution dist = load_distribution(o.config);
  std::optional<SystematicSplit> split;
  if (!o.holdout.empty()) {
    run.input(o.holdout);
    split.emplace(dist, load_distribution(o.holdout));
  }
  std::vector<ContextVector> contexts;
  for (std::size_t i = 0; i < o.count; ++i) {
    Rng rng = make_stream(o.seed, "generate", i);
    ContextVector c = split ? split->sample_train(rng) : sample_context(dist, rng);
    c.id = context_id(i);
    contexts.push_back(std::move(c));
  }
  run.write("contexts.jsonl", dataset_text(contexts));
  return {{"count", contexts.size()}, {"holdout", !o.holdout.empty()}};
}

SignalSearchGrid grid_from_json(const json& j) {
  SignalSearchGrid g;
  static const std::set<std::string> known{"format", "version", "dataset", "green_values", "yellow_s",
                                           "red_clearance_s", "dt", "sim_steps", "warmup_steps"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("signal search: unknown key '" + k + "'");
  }
  if (j.value("format", "") != "intersim-signal-search" || j.value("version", 0) != 1)
    throw ConfigError("signal search: expected format 'intersim-signal-search' version 1");
  try {
    if (j.contains("green_values")) g.green_values = j.at("green_values").get<std::vector<double>>();
    if (j.contains("yellow_s")) g.yellow_s = j.at("yellow_s").get<double>();
    if (j.contains("red_clearance_s")) g.red_clearance_s = j.at("red_clearance_s").get<double>();
    if (j.contains("dt")) g.dt = j.at("dt").get<double>();
    if (j.contains("sim_steps")) g.sim_steps = j.at("sim_steps").get<int>();
    if (j.contains("warmup_steps")) g.warmup_steps = j.at("warmup_steps").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("signal search: ") + e.what());
  }
  return g;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json run_signal_opt(const Options& o, RunDir& run) {
  run.claim({"contexts.jsonl", "audit.json"});
  run.input(o.config);
  const json cfg = read_json(o.config);
  SignalSearchGrid grid = grid_from_json(cfg);
  grid.seed = o.seed;
  if (!cfg.contains("dataset") || !cfg.at("dataset").is_string()) throw ConfigError("signal search: 'dataset' path is required");
  const fs::path dataset = fs::path(o.config).parent_path() / cfg.at("dataset").get<std::string>();
  run.input(dataset);
  std::vector<ContextVector> contexts = load_dataset(dataset);
  json audits = json::array();
  for (ContextVector& c : contexts) {
    grid.offset_s = c.signal_offset;
    std::vector<double> inflows;
    for (const auto& a : c.approaches) inflows.push_back(a.inflow_vph);
    const SignalSearchResult r = optimize_signal_plan(c.topology(), inflows, grid, o.workers);
    if (!audit_certifies(r)) throw Error("signal search audit failed for context " + c.id);
    for (std::size_t k = 0; k < c.phases.size(); ++k) {
      c.phases[k].green_s = r.plan.phases[k].green_s;
      c.phases[k].yellow_s = r.plan.phases[k].yellow_s;
      c.phases[k].red_s = r.plan.phases[k].red_clearance_s;
    }
    c.validate();
    json a = r.audit_json();
    a["context_id"] = c.id;
    audits.push_back(a);
  }
  run.write("contexts.jsonl", dataset_text(contexts));
  run.write("audit.json", audits.dump(2) + "\n");
  return {{"contexts", contexts.size()}};
}

json run_simulate(const Options& o, RunDir& run) {
  std::vector<std::string> outputs{"summary.json"};
  if (o.trace) outputs.push_back("trace.csv");
  run.claim(outputs);
  run.input(o.config);
  EpisodeSpec spec = load_episode_spec(o.config);
  spec.seed = o.seed;
  const auto controller = make_controller(spec.controller);

  std::ostringstream trace;
  std::optional<TraceWriter> writer;
  TraceSink sink;
  if (o.trace) {
    writer.emplace(trace, spec.sim.dt);
    sink = [&writer](const std::vector<TraceRow>& rows) { writer->write(rows); };
  }
  const EpisodeMetrics m = run_episode(spec, *controller, sink);

  json per_approach = json::array();
  for (int a = 0; a < m.approach_count; ++a) {
    const auto e = m.per_vehicle_emission(a);
    per_approach.push_back({{"approach", a},
                            {"throughput", m.total_throughput(a)},
                            {"completed_trips", m.completed_trips(a)},
                            {"g_per_vehicle", e ? json(*e) : json(nullptr)}});
  }
  const auto e = m.per_vehicle_emission();
  json summary{{"format", "intersim-episode-summary"},
               {"version", 1},
               {"context_id", spec.context.id},
               {"controller", spec.controller},
               {"seed", spec.seed},
               {"coefficients_sha256", spec.coefficients_sha256},
               {"spawned", m.spawned},
               {"throughput", m.total_throughput()},
               {"entrants", m.vehicles.size()},
               {"completed_trips", m.completed_trips()},
               {"g_per_vehicle", e ? json(*e) : json(nullptr)},
               {"fleet_emission_g", m.fleet_emission_g},
               {"cost_lambda0", episode_cost(m, 0.0)},
               {"min_ttc_s", std::isfinite(m.min_ttc) ? json(m.min_ttc) : json(nullptr)},
               {"mean_abs_accel", m.mean_abs_accel},
               {"mean_jerk", m.mean_jerk},
               {"approaches", per_approach}};
  run.write("summary.json", summary.dump(2) + "\n");
  if (o.trace) run.write("trace.csv", trace.str());
  return {{"controller", spec.controller}, {"horizon", spec.sim.horizon}, {"warmup", spec.sim.warmup}};
}

json run_calibrate(const Options& o, RunDir& run) {
  run.claim({"calibration.json", "posterior_draws.csv"});
  run.input(o.config);
  const json cfg = read_json(o.config);
  static const std::set<std::string> known{"format", "version", "trace", "synthetic", "prior", "chain"};
  for (const auto& [k, v] : cfg.items()) {
    if (!known.count(k)) throw ConfigError("calibration: unknown key '" + k + "'");
  }
  if (cfg.value("format", "") != "intersim-calibration" || cfg.value("version", 0) != 1)
    throw ConfigError("calibration: expected format 'intersim-calibration' version 1");
  if (cfg.contains("trace") == cfg.contains("synthetic"))
    throw ConfigError("calibration: give exactly one of 'trace' or 'synthetic'");

  TrajectoryDataset data;
  if (cfg.contains("trace")) {
    const fs::path path = fs::path(o.config).parent_path() / cfg.at("trace").get<std::string>();
    run.input(path);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace " + path.string());
    data = dataset_from_trace(read_trace(in));
  } else {
    const json& s = cfg.at("synthetic");
    try {
      IdmParams theta;
      const auto t = s.at("theta").get<std::array<double, kThetaDim>>();
      theta.v_desired = t[0];
      theta.gap_min = t[1];
      theta.headway_time = t[2];
      theta.accel_max = t[3];
      theta.decel_comf = t[4];
      data = synthetic_dataset(theta, s.at("sigma_eps").get<double>(), s.at("transitions").get<std::size_t>(),
                               s.value("dt", 0.5), o.seed);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("calibration: 'synthetic' needs theta[5], sigma_eps, transitions: ") + e.what());
    }
  }
  const CalibrationPrior prior = cfg.contains("prior") ? CalibrationPrior::from_json(cfg.at("prior"))
                                                       : CalibrationPrior::defaults();
  ChainConfig chain;
  if (cfg.contains("chain")) {
    const json& c = cfg.at("chain");
    try {
      chain.chains = c.value("chains", chain.chains);
      chain.burn_in = c.value("burn_in", chain.burn_in);
      chain.draws = c.value("draws", chain.draws);
      chain.init_jitter = c.value("init_jitter", chain.init_jitter);
      chain.mala = c.value("proposal", std::string("random_walk")) == "mala";
    } catch (const json::exception& e) {
      throw ConfigError(std::string("calibration: 'chain': ") + e.what());
    }
  }
  chain.workers = o.workers;
  const PopulationFit fit = fit_population(data, prior, chain, o.seed);
  run.write("calibration.json", calibration_report(fit, prior, chain, o.seed).dump(2) + "\n");

  std::ostringstream draws;
  draws << "class,chain,draw,v_desired,gap_min,headway_time,accel_max,decel_comf,sigma_eps\n";
  for (const auto& [c, f] : fit.classes) {
    if (!f.posterior) continue;
    const PosteriorSample& p = *f.posterior;
    for (std::size_t i = 0; i < p.draws.size(); ++i) {
      draws << to_string(c) << ',' << i / static_cast<std::size_t>(p.draws_per_chain) << ','
            << i % static_cast<std::size_t>(p.draws_per_chain);
      for (double x : p.draws[i]) draws << ',' << format_double(std::exp(x));
      draws << '\n';
    }
  }
  run.write("posterior_draws.csv", draws.str());
  return {{"transitions", data.transition_count()}};
}

json run_evaluate(const Options& o, RunDir& run) {
  run.claim({"report.json", "histogram_approach.csv", "histogram_intersection.csv"});
  run.input(o.config);
  CampaignSpec spec = load_campaign(o.config);
  if (o.bins) {
    spec.bin_width = *o.bins;
    spec.validate();
  }
  const EvalReport report = run_campaign(spec, o.seed, o.workers);
  run.write("report.json", report.text());
  run.write("histogram_approach.csv", histogram_csv(report.approach_histogram));
  run.write("histogram_intersection.csv", histogram_csv(report.intersection_histogram));
  return {{"protocol", report.protocol}, {"records", report.records.size()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signalized-intersection eco-driving simulation suite"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed")->required();
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--workers", o.workers, "Worker threads (0: all cores)");
    sub->add_flag("--force", o.force, "Overwrite existing outputs");
    sub->add_flag("-v,--verbose", o.verbose, "Progress on stderr");
  };
  auto* gen = app.add_subcommand("generate", "Sample context-MDPs from a feature distribution");
  common(gen);
  gen->add_option("--count", o.count, "Number of contexts")->check(CLI::PositiveNumber);
  gen->add_option("--holdout", o.holdout, "Distribution excluded from the samples")->check(CLI::ExistingFile);
  auto* opt = app.add_subcommand("signal-opt", "Exhaustive fixed-time signal search over a dataset");
  common(opt);
  auto* sim = app.add_subcommand("simulate", "Run one episode");
  common(sim);
  sim->add_flag("--trace", o.trace, "Write the per-step trace");
  auto* cal = app.add_subcommand("calibrate", "Bayesian IDM calibration");
  common(cal);
  auto* ev = app.add_subcommand("evaluate", "Run an evaluation campaign");
  common(ev);
  ev->add_option("--bins", o.bins, "Histogram bin width in percentage points")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::string> args(argv, argv + argc);
  const auto start = std::chrono::steady_clock::now();
  try {
    RunDir run(o.out, o.force);
    json details;
    std::string command;
    if (gen->parsed()) {
      command = "generate";
      details = run_generate(o, run);
    } else if (opt->parsed()) {
      command = "signal-opt";
      details = run_signal_opt(o, run);
    } else if (sim->parsed()) {
      command = "simulate";
      details = run_simulate(o, run);
    } else if (cal->parsed()) {
      command = "calibrate";
      details = run_calibrate(o, run);
    } else {
      command = "evaluate";
      details = run_evaluate(o, run);
    }
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.manifest(command, o, args, details, runtime);
    if (o.verbose) std::cerr << command << ": done in " << runtime << " s\n";
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "error: line " << e.line() << ", field '" << e.field() << "': " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
