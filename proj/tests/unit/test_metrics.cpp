#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "intersim/controllers.hpp"
#include "intersim/metrics.hpp"
#include "support.hpp"

namespace intersim {
namespace {

VehicleRecord trip(VehicleId id, double grams, double seconds, int approach = 0, bool done = true) {
  VehicleRecord r;
  r.id = id;
  r.approach = approach;
  r.emission_g = grams;
  r.travel_time_s = seconds;
  if (done) r.exit_step = 100;
  return r;
}

// n completed trips of `grams` each, `throughput` exits on approach 0.
EpisodeMetrics flat_metrics(std::size_t n, double grams, std::uint64_t throughput) {
  EpisodeMetrics m;
  m.approach_count = 1;
  for (std::size_t i = 0; i < n; ++i) m.vehicles.push_back(trip(i + 1, grams, 30.0));
  m.throughput = {throughput};
  m.spawned = n;
  return m;
}

TEST(EpisodeCost, WorkedExample) {
  EpisodeMetrics m;
  m.approach_count = 1;
  m.throughput = {2};
  m.vehicles = {trip(1, 10.0, 30.0), trip(2, 20.0, 40.0)};
  EXPECT_DOUBLE_EQ(episode_cost(m, 0.1), 37.0);
  EXPECT_DOUBLE_EQ(episode_cost(m, 0.0), 30.0);
  EXPECT_THROW(episode_cost(m, -0.1), InvalidInput);
  EXPECT_THROW(episode_cost(m, kInf), InvalidInput);
}

TEST(EpisodeCost, UnfinishedTripsCountTravelTime) {
  EpisodeMetrics m;
  m.approach_count = 1;
  m.throughput = {1};
  m.vehicles = {trip(1, 10.0, 30.0), trip(2, 4.0, 12.0, 0, false)};
  EXPECT_DOUBLE_EQ(episode_cost(m, 1.0), 56.0);
  EXPECT_EQ(m.completed_trips(), 1u);
  EXPECT_DOUBLE_EQ(*m.per_vehicle_emission(), 10.0);
}

TEST(Metrics, PerApproachQueries) {
  EpisodeMetrics m;
  m.approach_count = 2;
  m.throughput = {3, 1};
  m.vehicles = {trip(1, 10.0, 30.0, 0), trip(2, 20.0, 30.0, 1), trip(3, 30.0, 30.0, 0)};
  EXPECT_EQ(m.total_throughput(), 4u);
  EXPECT_EQ(m.total_throughput(1), 1u);
  EXPECT_DOUBLE_EQ(*m.per_vehicle_emission(0), 20.0);
  EXPECT_DOUBLE_EQ(*m.per_vehicle_emission(), 20.0);
  EXPECT_EQ(m.completed_trips(1), 1u);
  EXPECT_FALSE(EpisodeMetrics{}.per_vehicle_emission().has_value());
}

TEST(Benefits, Identical) {
  const EpisodeMetrics m = flat_metrics(10, 10.0, 100);
  const BenefitRecord r = benefits(m, m);
  EXPECT_EQ(r.emission_benefit_pct, 0.0);
  EXPECT_EQ(r.throughput_change_pct, 0.0);
  EXPECT_FALSE(r.zeroed);
}

TEST(Benefits, TwentyPercent) {
  const BenefitRecord r = benefits(flat_metrics(10, 8.0, 100), flat_metrics(10, 10.0, 100));
  EXPECT_NEAR(r.emission_benefit_pct, 20.0, 1e-12);
  EXPECT_FALSE(r.zeroed);
}

TEST(Benefits, LostThroughputZeroes) {
  const BenefitRecord r = benefits(flat_metrics(10, 8.0, 95), flat_metrics(10, 10.0, 100));
  EXPECT_TRUE(r.zeroed);
  EXPECT_EQ(r.emission_benefit_pct, 0.0);
  EXPECT_NEAR(r.raw_emission_benefit_pct, 20.0, 1e-12);
  EXPECT_NEAR(r.throughput_change_pct, -5.0, 1e-12);
  EXPECT_TRUE(r.intersection_zeroed);
  EXPECT_EQ(r.intersection_rule_benefit_pct, 0.0);
}

TEST(Benefits, ZeroingSoundness) {
  Rng rng = make_stream(1, "benefits");
  for (int k = 0; k < 500; ++k) {
    const auto tb = static_cast<std::uint64_t>(uniform_in(rng, 50.0, 60.0));
    const auto tp = static_cast<std::uint64_t>(uniform_in(rng, 50.0, 60.0));
    const BenefitRecord r =
        benefits(flat_metrics(8, uniform_in(rng, 5.0, 15.0), tp), flat_metrics(8, uniform_in(rng, 5.0, 15.0), tb));
    EXPECT_EQ(r.zeroed, tp < tb);
    if (r.zeroed) {
      EXPECT_EQ(r.emission_benefit_pct, 0.0);
    }
    EXPECT_TRUE(std::isfinite(r.emission_benefit_pct));
    EXPECT_TRUE(std::isfinite(r.throughput_change_pct));
  }
}

TEST(Benefits, ApproachVersusIntersectionRule) {
  EpisodeMetrics base, pol;
  base.approach_count = pol.approach_count = 2;
  base.vehicles = {trip(1, 10.0, 30.0, 0), trip(2, 10.0, 30.0, 1)};
  pol.vehicles = {trip(1, 8.0, 30.0, 0), trip(2, 10.0, 30.0, 1)};
  base.throughput = {10, 10};
  pol.throughput = {10, 9};
  const BenefitRecord a0 = benefits(pol, base, 0);
  EXPECT_FALSE(a0.zeroed);
  EXPECT_NEAR(a0.emission_benefit_pct, 20.0, 1e-12);
  EXPECT_TRUE(a0.intersection_zeroed);
  EXPECT_EQ(a0.intersection_rule_benefit_pct, 0.0);
}

TEST(Benefits, UndefinedBaseline) {
  EXPECT_THROW(benefits(flat_metrics(3, 1.0, 3), flat_metrics(3, 0.0, 3)), InvalidInput);
  EXPECT_THROW(benefits(flat_metrics(3, 1.0, 3), flat_metrics(0, 1.0, 0)), InvalidInput);
  EXPECT_THROW(benefits(flat_metrics(0, 1.0, 0), flat_metrics(3, 1.0, 3)), InvalidInput);
}

TEST(Histogram, BinsAndMass) {
  const std::vector<double> v{-7.0, -0.1, 0.0, 0.0, 4.99, 5.0, 22.0};
  const auto bins = histogram(v, 5.0);
  ASSERT_EQ(bins.size(), 7u);
  EXPECT_EQ(bins.front(), (HistogramBin{-10.0, -5.0, 1}));
  EXPECT_EQ(bins[1], (HistogramBin{-5.0, 0.0, 1}));
  EXPECT_EQ(bins[2], (HistogramBin{0.0, 5.0, 3}));
  EXPECT_EQ(bins[3], (HistogramBin{5.0, 10.0, 1}));
  EXPECT_EQ(bins[4].count, 0u);
  EXPECT_EQ(bins.back(), (HistogramBin{20.0, 25.0, 1}));
  const std::size_t mass =
      std::accumulate(bins.begin(), bins.end(), std::size_t{0}, [](std::size_t s, const HistogramBin& b) { return s + b.count; });
  EXPECT_EQ(mass, v.size());
  EXPECT_TRUE(histogram({}, 5.0).empty());
  EXPECT_THROW(histogram(v, 0.0), InvalidInput);
  EXPECT_THROW(histogram({std::nan("")}, 5.0), InvalidInput);
}

TEST(Histogram, Csv) {
  const std::string csv = histogram_csv({{0.0, 5.0, 2}, {5.0, 10.0, 0}});
  EXPECT_EQ(csv, "bin_low,bin_high,count\n0,5,2\n5,10,0\n");
}

TEST(Merge, PoolsRuns) {
  const EpisodeMetrics a = flat_metrics(2, 10.0, 2);
  const EpisodeMetrics b = flat_metrics(3, 20.0, 3);
  const EpisodeMetrics m = merge_metrics({a, b});
  EXPECT_EQ(m.vehicles.size(), 5u);
  EXPECT_EQ(m.total_throughput(), 5u);
  EXPECT_EQ(m.episodes, 2u);
  EXPECT_DOUBLE_EQ(*m.per_vehicle_emission(), 16.0);
  EXPECT_THROW(merge_metrics({}), InvalidInput);
}

EpisodeSpec reference_spec(double adoption, std::uint64_t seed = 21) {
  EpisodeSpec e;
  e.context = test::reference_context();
  e.context.adoption_level = adoption;
  e.seed = seed;
  return e;
}

TEST(RunEpisode, Bookkeeping) {
  BaselineController ctl;
  const EpisodeMetrics m = run_episode(reference_spec(0.0), ctl);
  EXPECT_EQ(m.approach_count, 2);
  EXPECT_GT(m.total_throughput(), 0u);
  EXPECT_LE(m.total_throughput(), m.spawned);
  EXPECT_GT(m.completed_trips(), 0u);
  for (const VehicleRecord& v : m.vehicles) {
    EXPECT_GE(v.arrival_step, 50);
    EXPECT_GT(v.travel_time_s, 0.0);
  }
  EXPECT_GT(episode_cost(m, 0.0), 0.0);
  EXPECT_LE(episode_cost(m, 0.0), m.fleet_emission_g);
}

TEST(RunEpisode, AllElectricFleetCostsNothing) {
  EpisodeSpec e = reference_spec(0.0);
  e.context.ev_share = 1.0;
  BaselineController ctl;
  const EpisodeMetrics m = run_episode(e, ctl);
  EXPECT_EQ(episode_cost(m, 0.0), 0.0);
  EXPECT_THROW(benefits(m, m), InvalidInput);
}

TEST(RunEpisode, BaselineSharesStreamsWithPolicy) {
  const EpisodeSpec policy = reference_spec(1.0);
  const EpisodeSpec base = baseline_spec(policy);
  EXPECT_EQ(base.context.adoption_level, 0.0);
  EXPECT_EQ(base.controller, "baseline");
  EXPECT_EQ(base.seed, policy.seed);

  auto warmup_rows = [](const EpisodeSpec& spec, Controller& ctl) {
    std::vector<TraceRow> rows;
    run_episode(spec, ctl, [&](const std::vector<TraceRow>& step) {
      for (const TraceRow& r : step) {
        if (r.step < spec.sim.warmup) rows.push_back(r);
      }
    });
    return rows;
  };
  GlideToGreenController glide;
  BaselineController idm;
  const auto a = warmup_rows(policy, glide);
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, warmup_rows(base, idm));
}

}  // namespace
}  // namespace intersim
