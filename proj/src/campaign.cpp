#include "intersim/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "intersim/controllers.hpp"
#include "intersim/io.hpp"

namespace intersim {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& what) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(what + ": unknown key '" + k + "'");
  }
}

void check_header(const json& j, const char* format, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  if (j.value("format", "") != format) throw ConfigError(what + ": format must be '" + format + "'");
  if (!j.contains("version") || j.at("version") != 1) throw ConfigError(what + ": unsupported version");
}

FeatureDistribution distribution_ref(const json& v, const std::filesystem::path& base, const std::string& what) {
  if (v.is_string()) return load_distribution(base / v.get<std::string>());
  if (v.is_object()) return FeatureDistribution::from_json(v);
  throw ConfigError(what + " must be a path or an inline distribution");
}

double number(const json& j, const char* key, double fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(what + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

std::int64_t integer(const json& j, const char* key, std::int64_t fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(what + ": '" + key + "' must be an integer");
  return j.at(key).get<std::int64_t>();
}

std::string indexed_id(const std::string& name, const std::string& tag, std::size_t i) {
  return name + "-" + tag + std::to_string(i);
}

}  // namespace

void CmdpSpec::validate() const {
  if (name.empty()) throw ConfigError("cmdp: 'name' is required");
  if (dataset.has_value() == distribution.has_value())
    throw ConfigError("cmdp: source needs exactly one of 'dataset' or 'distribution'");
  if (distribution && count == 0) throw ConfigError("cmdp: a distribution source needs 'count' >= 1");
  if (iid_fraction && !(*iid_fraction > 0.0 && *iid_fraction < 1.0))
    throw ConfigError("cmdp: 'iid_fraction' must lie in (0, 1)");
  if (holdout && !distribution) throw ConfigError("cmdp: a holdout split needs a distribution source");
  if (holdout) split_systematicity(*distribution, *holdout);
}

CmdpSpec cmdp_from_json(const json& j, const std::filesystem::path& base) {
  const std::string what = "cmdp";
  check_header(j, "intersim-cmdp", what);
  reject_unknown(j, {"format", "version", "name", "source", "split"}, what);
  CmdpSpec c;
  if (!j.contains("name") || !j.at("name").is_string()) throw ConfigError("cmdp: 'name' must be a string");
  c.name = j.at("name").get<std::string>();
  if (!j.contains("source") || !j.at("source").is_object()) throw ConfigError("cmdp: 'source' must be an object");
  const json& src = j.at("source");
  reject_unknown(src, {"dataset", "distribution", "count"}, "cmdp source");
  if (src.contains("dataset")) {
    if (!src.at("dataset").is_string()) throw ConfigError("cmdp: 'dataset' must be a path");
    c.dataset = base / src.at("dataset").get<std::string>();
  }
  if (src.contains("distribution")) c.distribution = distribution_ref(src.at("distribution"), base, "cmdp: 'distribution'");
  const std::int64_t count = integer(src, "count", 0, what);
  if (count < 0) throw ConfigError("cmdp: 'count' must be >= 0");
  c.count = static_cast<std::size_t>(count);
  if (j.contains("split")) {
    const json& split = j.at("split");
    if (!split.is_object()) throw ConfigError("cmdp: 'split' must be an object");
    reject_unknown(split, {"iid_fraction", "holdout"}, "cmdp split");
    if (split.contains("iid_fraction")) c.iid_fraction = number(split, "iid_fraction", 0.0, what);
    if (split.contains("holdout")) c.holdout = distribution_ref(split.at("holdout"), base, "cmdp: 'holdout'");
  }
  c.validate();
  return c;
}

CmdpSpec load_cmdp(const std::filesystem::path& path) {
  return cmdp_from_json(parse_json(read_file(path), path.string()), path.parent_path());
}

ContextPool cmdp_contexts(const CmdpSpec& cmdp, std::uint64_t seed) {
  ContextPool pool;
  if (cmdp.dataset) {
    pool.contexts = load_dataset(*cmdp.dataset);
    for (std::size_t i = 0; i < pool.contexts.size(); ++i) {
      if (pool.contexts[i].id.empty()) pool.contexts[i].id = indexed_id(cmdp.name, "", i);
    }
    return pool;
  }
  std::optional<SystematicSplit> split;
  if (cmdp.holdout) split.emplace(*cmdp.distribution, *cmdp.holdout);
  for (std::size_t i = 0; i < cmdp.count; ++i) {
    const std::string id = indexed_id(cmdp.name, "", i);
    Rng rng = make_stream(seed, "cmdp:" + cmdp.name, i);
    try {
      ContextVector ctx = split ? split->sample_train(rng) : sample_context(*cmdp.distribution, rng);
      ctx.id = id;
      pool.contexts.push_back(std::move(ctx));
    } catch (const Error& e) {
      pool.failures.push_back({id, e.what()});
    }
  }
  return pool;
}

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::iid: return "iid";
    case Protocol::ood: return "ood";
    case Protocol::systematicity: return "systematicity";
  }
  return "?";
}

Protocol parse_protocol(std::string_view s) {
  if (s == "iid") return Protocol::iid;
  if (s == "ood") return Protocol::ood;
  if (s == "systematicity") return Protocol::systematicity;
  throw ConfigError("unknown protocol '" + std::string(s) + "'");
}

void CampaignSpec::validate() const {
  cmdp.validate();
  if (protocol == Protocol::ood && !test_cmdp) throw ConfigError("campaign: protocol 'ood' needs 'test_cmdp'");
  if (protocol != Protocol::ood && test_cmdp) throw ConfigError("campaign: 'test_cmdp' is only used by protocol 'ood'");
  if (protocol == Protocol::systematicity && !cmdp.holdout)
    throw ConfigError("campaign: protocol 'systematicity' needs a cmdp with a holdout split");
  if (test_cmdp) test_cmdp->validate();
  make_controller(controller);
  if (seeds_per_context < 1) throw ConfigError("campaign: 'seeds_per_context' must be >= 1");
  if (adoption_level && !(*adoption_level >= 0.0 && *adoption_level <= 1.0))
    throw ConfigError("campaign: 'adoption_level' must lie in [0, 1]");
  sim.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("campaign: 'lambda' must be finite and >= 0");
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw ConfigError("campaign: 'bin_width' must be positive");
  coefficients.coefficients.validate();
}

CampaignSpec campaign_from_text(const std::string& text, const std::filesystem::path& base) {
  const std::string what = "campaign";
  const json j = parse_json(text, what);
  check_header(j, "intersim-campaign", what);
  reject_unknown(j,
                 {"format", "version", "protocol", "cmdp", "test_cmdp", "controller", "seeds_per_context", "contexts",
                  "adoption_level", "dt", "horizon", "warmup", "lambda", "bin_width", "emission_coefficients"},
                 what);
  CampaignSpec c;
  c.sha256 = sha256_hex(text);
  if (!j.contains("protocol") || !j.at("protocol").is_string()) throw ConfigError("campaign: 'protocol' is required");
  c.protocol = parse_protocol(j.at("protocol").get<std::string>());
  auto cmdp_ref = [&base](const json& v, const char* key) {
    if (v.is_string()) return load_cmdp(base / v.get<std::string>());
    if (v.is_object()) return cmdp_from_json(v, base);
    throw ConfigError(std::string("campaign: '") + key + "' must be a path or an inline cmdp");
  };
  if (!j.contains("cmdp")) throw ConfigError("campaign: 'cmdp' is required");
  c.cmdp = cmdp_ref(j.at("cmdp"), "cmdp");
  if (j.contains("test_cmdp")) c.test_cmdp = cmdp_ref(j.at("test_cmdp"), "test_cmdp");
  if (j.contains("controller")) {
    if (!j.at("controller").is_string()) throw ConfigError("campaign: 'controller' must be a string");
    c.controller = j.at("controller").get<std::string>();
  }
  c.seeds_per_context = static_cast<int>(integer(j, "seeds_per_context", 1, what));
  if (j.contains("contexts")) {
    const std::int64_t n = integer(j, "contexts", 0, what);
    if (n < 1) throw ConfigError("campaign: 'contexts' must be >= 1");
    c.max_contexts = static_cast<std::size_t>(n);
  }
  if (j.contains("adoption_level")) c.adoption_level = number(j, "adoption_level", 0.0, what);
  c.sim.dt = number(j, "dt", c.sim.dt, what);
  c.sim.horizon = static_cast<int>(integer(j, "horizon", c.sim.horizon, what));
  c.sim.warmup = static_cast<int>(integer(j, "warmup", c.sim.warmup, what));
  c.lambda = number(j, "lambda", c.lambda, what);
  c.bin_width = number(j, "bin_width", c.bin_width, what);
  if (j.contains("emission_coefficients")) {
    if (!j.at("emission_coefficients").is_string()) throw ConfigError("campaign: 'emission_coefficients' must be a path");
    c.coefficients = load_coefficients(base / j.at("emission_coefficients").get<std::string>());
  }
  c.validate();
  return c;
}

CampaignSpec load_campaign(const std::filesystem::path& path) {
  return campaign_from_text(read_file(path), path.parent_path());
}

ContextPool test_contexts(const CampaignSpec& spec, std::uint64_t seed) {
  ContextPool pool;
  switch (spec.protocol) {
    case Protocol::iid: {
      ContextPool all = cmdp_contexts(spec.cmdp, seed);
      Rng rng = make_stream(seed, "iid-split");
      std::shuffle(all.contexts.begin(), all.contexts.end(), rng);
      const double frac = spec.cmdp.iid_fraction.value_or(0.2);
      const auto n = static_cast<std::size_t>(std::llround(frac * static_cast<double>(all.contexts.size())));
      const std::size_t take = std::min(all.contexts.size(), std::max<std::size_t>(1, n));
      pool.contexts.assign(all.contexts.end() - static_cast<std::ptrdiff_t>(take), all.contexts.end());
      pool.failures = std::move(all.failures);
      break;
    }
    case Protocol::ood:
      pool = cmdp_contexts(*spec.test_cmdp, seed);
      break;
    case Protocol::systematicity: {
      const SystematicSplit split(*spec.cmdp.distribution, *spec.cmdp.holdout);
      const std::size_t n = spec.max_contexts.value_or(spec.cmdp.count);
      for (std::size_t i = 0; i < n; ++i) {
        const std::string id = indexed_id(spec.cmdp.name, "test-", i);
        Rng rng = make_stream(seed, "systematicity-test:" + spec.cmdp.name, i);
        try {
          ContextVector ctx = split.sample_test(rng);
          ctx.id = id;
          pool.contexts.push_back(std::move(ctx));
        } catch (const Error& e) {
          pool.failures.push_back({id, e.what()});
        }
      }
      break;
    }
  }
  if (spec.max_contexts && pool.contexts.size() > *spec.max_contexts) pool.contexts.resize(*spec.max_contexts);
  return pool;
}

EpisodeSpec campaign_episode(const CampaignSpec& spec, const ContextVector& ctx, std::uint64_t episode_seed) {
  EpisodeSpec e;
  e.context = ctx;
  if (spec.adoption_level) e.context.adoption_level = *spec.adoption_level;
  e.sim = spec.sim;
  e.sim.spawn_gate = spawn_gate_for(e.context);
  e.coefficients = spec.coefficients.coefficients;
  e.coefficients_sha256 = spec.coefficients.sha256;
  e.controller = spec.controller;
  e.seed = episode_seed;
  return e;
}

namespace {

struct JobResult {
  std::optional<EpisodeMetrics> policy;
  std::optional<EpisodeMetrics> baseline;
  std::string error;
};

std::optional<double> mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json bins_json(const std::vector<HistogramBin>& bins) {
  json out = json::array();
  for (const HistogramBin& b : bins) out.push_back({{"bin_low", b.low}, {"bin_high", b.high}, {"count", b.count}});
  return out;
}

}  // namespace

EvalReport run_campaign(const CampaignSpec& spec, std::uint64_t seed, unsigned workers) {
  spec.validate();
  const ContextPool pool = test_contexts(spec, seed);
  const auto seeds = static_cast<std::size_t>(spec.seeds_per_context);

  EvalReport report;
  report.protocol = std::string(to_string(spec.protocol));
  report.controller = spec.controller;
  report.campaign_sha256 = spec.sha256;
  report.coefficients_sha256 = spec.coefficients.sha256;
  report.seed = seed;
  report.lambda = spec.lambda;
  report.bin_width = spec.bin_width;
  for (std::size_t k = 0; k < seeds; ++k) report.episode_seeds.push_back(mix_seed(seed, k));

  std::vector<JobResult> jobs(pool.contexts.size() * seeds);
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const ContextVector& ctx = pool.contexts[i / seeds];
    const EpisodeSpec policy = campaign_episode(spec, ctx, report.episode_seeds[i % seeds]);
    try {
      const auto controller = make_controller(spec.controller);
      jobs[i].policy = run_episode(policy, *controller);
      BaselineController human;
      jobs[i].baseline = run_episode(baseline_spec(policy), human);
    } catch (const Error& e) {
      jobs[i].error = e.what();
    }
  });

  for (const ContextFailure& f : pool.failures) report.contexts.push_back({f.id, true, f.reason, 0.0, 0.0, 0, 0});
  for (std::size_t c = 0; c < pool.contexts.size(); ++c) {
    const ContextVector& ctx = pool.contexts[c];
    ContextOutcome out;
    out.context_id = ctx.id;
    std::vector<EpisodeMetrics> pol;
    std::vector<EpisodeMetrics> base;
    for (std::size_t k = 0; k < seeds; ++k) {
      const JobResult& r = jobs[c * seeds + k];
      if (!r.error.empty()) {
        out.skipped = true;
        out.reason = r.error;
        break;
      }
      pol.push_back(*r.policy);
      base.push_back(*r.baseline);
    }
    const int approaches = static_cast<int>(ctx.approaches.size());
    if (out.skipped) {
      for (int a = 0; a < approaches; ++a) {
        BenefitRecord rec;
        rec.context_id = ctx.id;
        rec.approach = a;
        rec.seeds = report.episode_seeds;
        rec.skipped = true;
        rec.skip_reason = out.reason;
        report.records.push_back(rec);
      }
      report.contexts.push_back(out);
      continue;
    }
    const EpisodeMetrics p = merge_metrics(pol);
    const EpisodeMetrics b = merge_metrics(base);
    for (std::size_t k = 0; k < seeds; ++k) {
      out.policy_cost += episode_cost(pol[k], spec.lambda) / static_cast<double>(seeds);
      out.baseline_cost += episode_cost(base[k], spec.lambda) / static_cast<double>(seeds);
    }
    out.policy_throughput = p.total_throughput();
    out.baseline_throughput = b.total_throughput();
    for (int a = 0; a < approaches; ++a) {
      BenefitRecord rec;
      try {
        rec = benefits(p, b, a);
      } catch (const InvalidInput& e) {
        rec.approach = a;
        rec.skipped = true;
        rec.skip_reason = e.what();
      }
      rec.context_id = ctx.id;
      rec.seeds = report.episode_seeds;
      report.records.push_back(rec);
    }
    report.contexts.push_back(out);
  }

  std::vector<double> own;
  std::vector<double> inter;
  for (const BenefitRecord& r : report.records) {
    if (r.skipped) continue;
    own.push_back(r.emission_benefit_pct);
    inter.push_back(r.intersection_rule_benefit_pct);
  }
  report.approach_histogram = histogram(own, spec.bin_width);
  report.intersection_histogram = histogram(inter, spec.bin_width);
  return report;
}

json EvalReport::to_json() const {
  json j;
  j["format"] = "intersim-eval-report";
  j["version"] = 1;
  j["protocol"] = protocol;
  j["controller"] = controller;
  j["campaign_sha256"] = campaign_sha256;
  j["coefficients_sha256"] = coefficients_sha256;
  j["seed"] = seed;
  j["episode_seeds"] = episode_seeds;
  j["lambda"] = lambda;
  j["bin_width"] = bin_width;

  json ctxs = json::array();
  for (const ContextOutcome& c : contexts) {
    json o{{"id", c.context_id}, {"skipped", c.skipped}};
    if (c.skipped) {
      o["reason"] = c.reason;
    } else {
      o["baseline_cost"] = c.baseline_cost;
      o["policy_cost"] = c.policy_cost;
      o["baseline_throughput"] = c.baseline_throughput;
      o["policy_throughput"] = c.policy_throughput;
    }
    ctxs.push_back(o);
  }
  j["contexts"] = ctxs;
  json recs = json::array();
  for (const BenefitRecord& r : records) recs.push_back(r.to_json());
  j["records"] = recs;
  j["histograms"] = {{"approach", bins_json(approach_histogram)}, {"intersection_rule", bins_json(intersection_histogram)}};

  std::vector<double> own;
  std::vector<double> inter;
  std::vector<double> thr;
  std::size_t zeroed = 0;
  std::size_t inter_zeroed = 0;
  std::size_t skipped = 0;
  for (const BenefitRecord& r : records) {
    if (r.skipped) {
      ++skipped;
      continue;
    }
    own.push_back(r.emission_benefit_pct);
    inter.push_back(r.intersection_rule_benefit_pct);
    thr.push_back(r.throughput_change_pct);
    zeroed += r.zeroed ? 1 : 0;
    inter_zeroed += r.intersection_zeroed ? 1 : 0;
  }
  const auto evaluated = static_cast<std::size_t>(
      std::count_if(contexts.begin(), contexts.end(), [](const ContextOutcome& c) { return !c.skipped; }));
  j["summary"] = {{"contexts_evaluated", evaluated},
                  {"contexts_skipped", contexts.size() - evaluated},
                  {"records", own.size()},
                  {"records_skipped", skipped},
                  {"zeroed", zeroed},
                  {"intersection_zeroed", inter_zeroed},
                  {"mean_emission_benefit_pct", optional_number(mean(own))},
                  {"mean_intersection_rule_benefit_pct", optional_number(mean(inter))},
                  {"mean_throughput_change_pct", optional_number(mean(thr))}};
  return j;
}

std::string EvalReport::text() const { return to_json().dump(2) + "\n"; }

}  // namespace intersim
