#include <algorithm>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "intersim/campaign.hpp"
#include "intersim/io.hpp"
#include "support.hpp"

namespace intersim {
namespace {

using nlohmann::json;

json cmdp_json(std::size_t count, bool holdout = false) {
  json j{{"format", "intersim-cmdp"},
         {"version", 1},
         {"name", "proc"},
         {"source", {{"distribution", "procedural.json"}, {"count", count}}}};
  if (holdout) j["split"] = {{"holdout", "holdout_region.json"}};
  return j;
}

std::string campaign_text(const std::string& protocol, const json& cmdp, int horizon = 240) {
  json j{{"format", "intersim-campaign"},
         {"version", 1},
         {"protocol", protocol},
         {"cmdp", cmdp},
         {"controller", "glide_to_green"},
         {"horizon", horizon},
         {"warmup", 40}};
  return j.dump();
}

TEST(Cmdp, ParsesAndValidates) {
  const CmdpSpec c = cmdp_from_json(cmdp_json(12), test::data_dir());
  EXPECT_EQ(c.name, "proc");
  EXPECT_EQ(c.count, 12u);
  ASSERT_TRUE(c.distribution.has_value());
  EXPECT_EQ(c.distribution->approach_count, 4);

  json bad = cmdp_json(0);
  EXPECT_THROW(cmdp_from_json(bad, test::data_dir()), ConfigError);
  bad = cmdp_json(3);
  bad["source"]["dataset"] = "reference_single_lane.jsonl";
  EXPECT_THROW(cmdp_from_json(bad, test::data_dir()), ConfigError);
  bad = cmdp_json(3);
  bad["colour"] = "red";
  EXPECT_THROW(cmdp_from_json(bad, test::data_dir()), ConfigError);
  bad = cmdp_json(3);
  bad["split"] = {{"iid_fraction", 1.0}};
  EXPECT_THROW(cmdp_from_json(bad, test::data_dir()), ConfigError);
  bad = cmdp_json(3);
  bad["version"] = 2;
  EXPECT_THROW(cmdp_from_json(bad, test::data_dir()), ConfigError);
}

TEST(Cmdp, ContextsAreIndexedAndDeterministic) {
  const CmdpSpec c = cmdp_from_json(cmdp_json(6), test::data_dir());
  const ContextPool a = cmdp_contexts(c, 9);
  ASSERT_EQ(a.contexts.size(), 6u);
  EXPECT_TRUE(a.failures.empty());
  EXPECT_EQ(a.contexts[0].id, "proc-0");
  EXPECT_EQ(a.contexts[5].id, "proc-5");
  EXPECT_EQ(cmdp_contexts(c, 9).contexts, a.contexts);
  EXPECT_NE(cmdp_contexts(c, 10).contexts, a.contexts);

  // draw i does not depend on how many draws follow it
  const CmdpSpec shorter = cmdp_from_json(cmdp_json(2), test::data_dir());
  EXPECT_EQ(cmdp_contexts(shorter, 9).contexts[1], a.contexts[1]);
}

TEST(Cmdp, HoldoutRemovesRegionFromTraining) {
  const CmdpSpec c = cmdp_from_json(cmdp_json(200, true), test::data_dir());
  const FeatureDistribution region = *c.holdout;
  for (const ContextVector& ctx : cmdp_contexts(c, 1).contexts) EXPECT_FALSE(in_region(ctx, region));
}

TEST(Protocol, NamesRoundTrip) {
  for (Protocol p : {Protocol::iid, Protocol::ood, Protocol::systematicity}) EXPECT_EQ(parse_protocol(to_string(p)), p);
  EXPECT_THROW(parse_protocol("zero-shot"), ConfigError);
}

TEST(Campaign, ParseErrors) {
  const auto base = test::data_dir();
  EXPECT_NO_THROW(campaign_from_text(campaign_text("iid", cmdp_json(5)), base));
  EXPECT_THROW(campaign_from_text(campaign_text("ood", cmdp_json(5)), base), ConfigError);
  EXPECT_THROW(campaign_from_text(campaign_text("systematicity", cmdp_json(5)), base), ConfigError);
  json j = json::parse(campaign_text("iid", cmdp_json(5)));
  j["controller"] = "ppo";
  EXPECT_THROW(campaign_from_text(j.dump(), base), ConfigError);
  j = json::parse(campaign_text("iid", cmdp_json(5)));
  j["adoption_level"] = 1.5;
  EXPECT_THROW(campaign_from_text(j.dump(), base), ConfigError);
  j = json::parse(campaign_text("iid", cmdp_json(5)));
  j["seeds_per_context"] = 0;
  EXPECT_THROW(campaign_from_text(j.dump(), base), ConfigError);
  EXPECT_THROW(campaign_from_text("{", base), ConfigError);
}

TEST(Campaign, ShaCoversFileBytes) {
  const auto base = test::data_dir();
  const std::string text = campaign_text("iid", cmdp_json(5));
  EXPECT_EQ(campaign_from_text(text, base).sha256, sha256_hex(text));
  EXPECT_NE(campaign_from_text(text + " ", base).sha256, sha256_hex(text));
}

TEST(Protocols, TestContexts) {
  const auto base = test::data_dir();
  const CampaignSpec iid = campaign_from_text(campaign_text("iid", cmdp_json(20)), base);
  const ContextPool held = test_contexts(iid, 3);
  EXPECT_EQ(held.contexts.size(), 4u);
  const ContextPool all = cmdp_contexts(iid.cmdp, 3);
  for (const ContextVector& c : held.contexts) {
    EXPECT_NE(std::find(all.contexts.begin(), all.contexts.end(), c), all.contexts.end());
  }

  json ood = json::parse(campaign_text("ood", cmdp_json(20)));
  ood["test_cmdp"] = {{"format", "intersim-cmdp"},
                      {"version", 1},
                      {"name", "held"},
                      {"source", {{"distribution", "holdout_region.json"}, {"count", 7}}}};
  const CampaignSpec o = campaign_from_text(ood.dump(), base);
  const ContextPool oc = test_contexts(o, 3);
  ASSERT_EQ(oc.contexts.size(), 7u);
  EXPECT_EQ(oc.contexts[0].id, "held-0");

  json sys = json::parse(campaign_text("systematicity", cmdp_json(30, true)));
  sys["contexts"] = 25;
  const CampaignSpec s = campaign_from_text(sys.dump(), base);
  const ContextPool sc = test_contexts(s, 3);
  ASSERT_EQ(sc.contexts.size(), 25u);
  for (const ContextVector& c : sc.contexts) EXPECT_TRUE(in_region(c, *s.cmdp.holdout));
  EXPECT_EQ(sc.contexts[0].id, "proc-test-0");
}

TEST(Campaign, EpisodeAppliesOverrides) {
  json j = json::parse(campaign_text("iid", cmdp_json(5)));
  j["adoption_level"] = 0.25;
  const CampaignSpec spec = campaign_from_text(j.dump(), test::data_dir());
  const EpisodeSpec e = campaign_episode(spec, test::reference_context(), 77);
  EXPECT_EQ(e.context.adoption_level, 0.25);
  EXPECT_EQ(e.sim.horizon, 240);
  EXPECT_EQ(e.sim.warmup, 40);
  EXPECT_EQ(e.controller, "glide_to_green");
  EXPECT_EQ(e.seed, 77u);
}

std::filesystem::path write_dataset(const std::string& name, const std::vector<ContextVector>& cs) {
  const auto path = std::filesystem::temp_directory_path() / name;
  save_dataset(cs, path);
  return path;
}

json dataset_cmdp(const std::filesystem::path& path) {
  return {{"format", "intersim-cmdp"}, {"version", 1}, {"name", "ds"}, {"source", {{"dataset", path.string()}}}};
}

TEST(RunCampaign, OneContextOneSeedGivesOneRecordPerApproach) {
  const auto path = write_dataset("intersim_campaign_one.jsonl", {test::reference_context()});
  json j = json::parse(campaign_text("ood", cmdp_json(3), 400));
  j["test_cmdp"] = dataset_cmdp(path);
  const CampaignSpec spec = campaign_from_text(j.dump(), test::data_dir());
  const EvalReport r = run_campaign(spec, 5);
  std::filesystem::remove(path);
  ASSERT_EQ(r.contexts.size(), 1u);
  EXPECT_FALSE(r.contexts[0].skipped);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].approach, 0);
  EXPECT_EQ(r.records[1].approach, 1);
  EXPECT_EQ(r.episode_seeds, std::vector<std::uint64_t>{mix_seed(5, 0)});
  for (const BenefitRecord& rec : r.records) EXPECT_EQ(rec.context_id, "reference-single-lane");
}

TEST(RunCampaign, ReportIsDeterministicAndWorkerIndependent) {
  json j = json::parse(campaign_text("iid", cmdp_json(10)));
  j["seeds_per_context"] = 2;
  const CampaignSpec spec = campaign_from_text(j.dump(), test::data_dir());
  const std::string one = run_campaign(spec, 11, 1).text();
  EXPECT_EQ(run_campaign(spec, 11, 1).text(), one);
  EXPECT_EQ(run_campaign(spec, 11, 3).text(), one);
  EXPECT_NE(run_campaign(spec, 12, 1).text(), one);
}

TEST(RunCampaign, HistogramMassMatchesEvaluatedRecords) {
  ContextVector ev = test::reference_context();
  ev.id = "all-electric";
  ev.ev_share = 1.0;
  const auto path = write_dataset("intersim_campaign_mixed.jsonl", {test::reference_context(), ev});
  json j = json::parse(campaign_text("ood", cmdp_json(3), 300));
  j["test_cmdp"] = dataset_cmdp(path);
  const EvalReport r = run_campaign(campaign_from_text(j.dump(), test::data_dir()), 2);
  std::filesystem::remove(path);

  const auto evaluated = static_cast<std::size_t>(
      std::count_if(r.records.begin(), r.records.end(), [](const BenefitRecord& b) { return !b.skipped; }));
  auto mass = [](const std::vector<HistogramBin>& bins) {
    return std::accumulate(bins.begin(), bins.end(), std::size_t{0},
                           [](std::size_t s, const HistogramBin& b) { return s + b.count; });
  };
  EXPECT_EQ(evaluated, 2u);
  EXPECT_EQ(mass(r.approach_histogram), evaluated);
  EXPECT_EQ(mass(r.intersection_histogram), evaluated);

  // a zero-emission baseline leaves the benefit undefined; it is recorded, not dropped
  ASSERT_EQ(r.records.size(), 4u);
  for (std::size_t i = 2; i < 4; ++i) {
    EXPECT_TRUE(r.records[i].skipped);
    EXPECT_EQ(r.records[i].context_id, "all-electric");
    EXPECT_FALSE(r.records[i].skip_reason.empty());
  }
  const json summary = r.to_json().at("summary");
  EXPECT_EQ(summary.at("records"), 2);
  EXPECT_EQ(summary.at("records_skipped"), 2);
}

}  // namespace
}  // namespace intersim
