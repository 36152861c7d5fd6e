#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intersim/context.hpp"
#include "intersim/metrics.hpp"

namespace intersim {

/// A context-MDP collection: a dataset file, or a feature distribution sampled
/// `count` times. `holdout` carves a systematicity region out of the
/// distribution; `iid_fraction` is the share held out for IID testing.
struct CmdpSpec {
  std::string name;
  std::optional<std::filesystem::path> dataset;
  std::optional<FeatureDistribution> distribution;
  std::size_t count = 0;
  std::optional<double> iid_fraction;
  std::optional<FeatureDistribution> holdout;

  void validate() const;
};

/// {"format":"intersim-cmdp","version":1,"name":...,"source":{...},"split":{...}}.
/// Paths resolve against `base`.
CmdpSpec cmdp_from_json(const nlohmann::json& j, const std::filesystem::path& base);
CmdpSpec load_cmdp(const std::filesystem::path& path);

/// A context that could not be constructed, kept for the report.
struct ContextFailure {
  std::string id;
  std::string reason;
};

struct ContextPool {
  std::vector<ContextVector> contexts;
  std::vector<ContextFailure> failures;
};

/// Every context of the CMDP (training contexts when a holdout is set).
/// Sampled contexts get ids "<name>-<index>"; draw i uses its own stream.
ContextPool cmdp_contexts(const CmdpSpec& cmdp, std::uint64_t seed);

enum class Protocol { iid, ood, systematicity };
std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view s);

struct CampaignSpec {
  Protocol protocol = Protocol::iid;
  CmdpSpec cmdp;
  std::optional<CmdpSpec> test_cmdp;  // ood only
  std::string controller = "baseline";
  int seeds_per_context = 1;
  std::optional<std::size_t> max_contexts;
  std::optional<double> adoption_level;  // overrides every test context
  SimConfig sim;
  double lambda = 0.0;
  double bin_width = 5.0;
  CoefficientSet coefficients = default_coefficient_set();
  std::string sha256;  // of the campaign file bytes

  void validate() const;
};

/// {"format":"intersim-campaign","version":1,...}.
CampaignSpec campaign_from_text(const std::string& text, const std::filesystem::path& base);
CampaignSpec load_campaign(const std::filesystem::path& path);

/// Test contexts of the protocol: the IID holdout share of the CMDP, every
/// context of the OOD test CMDP, or draws from the systematicity region.
ContextPool test_contexts(const CampaignSpec& spec, std::uint64_t seed);

/// Episode for one test context: campaign timing and coefficients, adoption
/// override applied.
EpisodeSpec campaign_episode(const CampaignSpec& spec, const ContextVector& ctx, std::uint64_t episode_seed);

struct ContextOutcome {
  std::string context_id;
  bool skipped = false;
  std::string reason;
  double baseline_cost = 0.0;  // J, mean over seeds
  double policy_cost = 0.0;
  std::uint64_t baseline_throughput = 0;
  std::uint64_t policy_throughput = 0;
};

struct EvalReport {
  std::string protocol;
  std::string controller;
  std::string campaign_sha256;
  std::string coefficients_sha256;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> episode_seeds;
  double lambda = 0.0;
  double bin_width = 5.0;
  std::vector<ContextOutcome> contexts;
  std::vector<BenefitRecord> records;  // one per approach of every evaluated context
  std::vector<HistogramBin> approach_histogram;
  std::vector<HistogramBin> intersection_histogram;

  nlohmann::json to_json() const;
  /// Pretty-printed JSON with a trailing newline.
  std::string text() const;
};

/// Paired baseline/policy episodes for every test context and seed. Results
/// do not depend on `workers`.
EvalReport run_campaign(const CampaignSpec& spec, std::uint64_t seed, unsigned workers = 1);

}  // namespace intersim
