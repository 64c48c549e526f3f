#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "psw/sim.hpp"
#include "psw/threshold.hpp"
#include "psw/whittle.hpp"

using namespace psw;

namespace {

const SystemConfig two{0.4, {{0.55, 3.0}, {0.45, 2.0}}, 30, false};

SimOptions short_run(std::uint64_t seed = 1) {
  SimOptions o;
  o.horizon = 20000;
  o.burn_in = 1000;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(DepartureSampler, FrequenciesMatchBinomial) {
  const double q = 0.55;
  const DepartureSampler s(q, 10);
  Rng rng(4);
  const int n = 200000;
  for (State x : {1, 4, 10}) {
    std::vector<int> hits(x + 1, 0);
    for (int t = 0; t < n; ++t) ++hits[s(x, uniform01(rng))];
    for (State d = 0; d <= x; ++d) {
      const double pr = oracle::departure_prob(x, d, q);
      const double se = std::sqrt(pr * (1 - pr) / n);
      EXPECT_NEAR(hits[d] / double(n), pr, 5 * se + 1e-12) << "x=" << x << " d=" << d;
    }
  }
  EXPECT_EQ(s(0, 0.999), 0);
  EXPECT_EQ(s(3, 0.0), 0);
}

TEST(Simulate, SameSeedSameResult) {
  const auto a = simulate(two, CmuPolicy{two}, short_run(5));
  const auto b = simulate(two, CmuPolicy{two}, short_run(5));
  EXPECT_EQ(a.avg_cost, b.avg_cost);
  EXPECT_EQ(a.mean_length, b.mean_length);
  const auto c = simulate(two, CmuPolicy{two}, short_run(6));
  EXPECT_NE(a.avg_cost, c.avg_cost);
}

TEST(Simulate, CommonRandomNumbersAcrossPolicies) {
  // with one server every rule is the same rule, so the paths coincide
  const SystemConfig one{0.4, {{0.5, 1.0}}, 40, false};
  const auto a = simulate(one, CmuPolicy{one}, short_run(3));
  const auto b = simulate(one, RandomPolicy{1}, short_run(3));
  EXPECT_EQ(a.avg_cost, b.avg_cost);
}

TEST(Simulate, SingleQueueMatchesStationaryMean) {
  const SystemConfig one{0.4, {{0.5, 1.0}}, 40, false};
  SimOptions o;
  o.horizon = 400000;
  o.burn_in = 1000;
  const auto r = simulate(one, CmuPolicy{one}, o);
  EXPECT_NEAR(r.avg_cost, 2.8883173391340917, 0.1);
  EXPECT_EQ(r.mean_length.size(), 1u);
  EXPECT_EQ(r.avg_cost, r.mean_length[0]);
}

TEST(Simulate, ConservationHoldsEverySlot) {
  auto o = short_run();
  o.check_conservation = true;
  const SystemConfig tight{0.7, {{0.3, 1.0}, {0.2, 1.0}}, 3, false};
  const auto r = simulate(tight, RandomPolicy{2}, o);
  EXPECT_EQ(r.conservation_checks, 2 * o.horizon);
  EXPECT_GT(r.drops, 0);
  for (double m : r.mean_length) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 3.0);
  }
}

TEST(Simulate, TraceRecordsRunningAverage) {
  auto o = short_run();
  o.trace_every = 1000;
  const auto r = simulate(two, CmuPolicy{two}, o);
  ASSERT_EQ(r.trace.size(), 19u);
  EXPECT_EQ(r.trace.back().first, o.horizon);
  EXPECT_DOUBLE_EQ(r.trace.back().second, r.avg_cost);
  std::ostringstream os;
  write_trace(os, r);
  EXPECT_EQ(os.str().substr(0, 22), "slot,running_avg_cost\n");
}

TEST(Simulate, RejectsBadHorizon) {
  SimOptions o;
  o.horizon = 10;
  o.burn_in = 10;
  EXPECT_THROW(simulate(two, CmuPolicy{two}, o), std::invalid_argument);
  EXPECT_THROW(simulate(SystemConfig{0.4, {}, 5, false}, RandomPolicy{1}, short_run()),
               std::invalid_argument);
}

TEST(Simulate, RejectsPolicyChoosingMissingServer) {
  EXPECT_THROW(simulate(two, RandomPolicy{3}, short_run()), std::logic_error);
}

TEST(Compare, SummariesAndWorkerIndependence) {
  const IndexTable t = build_index_table(two, 20);
  const std::vector<PolicyKind> pols{WhittlePolicy{t}, CmuPolicy{two}, RandomPolicy{2}};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  const auto a = compare(two, pols, 20000, 1000, seeds, 1);
  const auto b = compare(two, pols, 20000, 1000, seeds, 3);
  ASSERT_EQ(a.reports.size(), 12u);
  for (std::size_t j = 0; j < a.reports.size(); ++j)
    EXPECT_EQ(a.reports[j].avg_cost, b.reports[j].avg_cost);
  EXPECT_EQ(a.summary("whittle").runs, 4u);
  EXPECT_GT(a.summary("random").mean, a.summary("whittle").mean);
  EXPECT_GT(a.summary("cmu").half_width, 0.0);
  EXPECT_THROW(a.summary("nope"), std::out_of_range);
}

TEST(Compare, RequiresPoliciesAndSeeds) {
  EXPECT_THROW(compare(two, {}, 100, 10, {1, 2}), std::invalid_argument);
  EXPECT_THROW(compare(two, {CmuPolicy{two}}, 100, 10, {1}), std::invalid_argument);
}

TEST(Summarize, MeanAndHalfWidth) {
  const auto s = summarize("x", {1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.half_width, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  EXPECT_EQ(summarize("y", {}).runs, 0u);
}

TEST(Writers, ReportTableLayout) {
  SimReport r;
  r.policy = "cmu";
  r.seed = 7;
  r.horizon = 100;
  r.burn_in = 10;
  r.avg_cost = 1.0 / 3.0;
  r.mean_length = {0.5, 0.25};
  r.drops = 2;
  std::ostringstream os;
  write_reports(os, {r});
  EXPECT_EQ(os.str(),
            "policy,seed,horizon,burn_in,avg_cost,mean_len_1,mean_len_2,drops\n"
            "cmu,7,100,10,0.333333333333,0.5,0.25,2\n");
  std::ostringstream ss;
  write_summaries(ss, {summarize("cmu", {1.0, 2.0})});
  EXPECT_EQ(ss.str().substr(0, 40), "policy,runs,mean_avg_cost,half_width_95\n");
}

TEST(Simulate, NearlyNoArrivalsKeepsQueuesEmpty) {
  const SystemConfig quiet{1e-6, {{0.55, 30}, {0.50, 29}, {0.45, 28}}, 100, false};
  SimOptions o;
  o.horizon = 100000;
  o.burn_in = 0;
  const auto r = simulate(quiet, RandomPolicy{3}, o);
  EXPECT_LT(r.avg_cost, 0.01 * 87);
}

TEST(Simulate, RandomPolicyTreatsSymmetricServersAlike) {
  const SystemConfig sym{0.4, {{0.5, 1.0}, {0.5, 1.0}}, 50, false};
  std::vector<double> diff;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto o = short_run(seed);
    o.horizon = 100000;
    const auto r = simulate(sym, RandomPolicy{2}, o);
    diff.push_back(r.mean_length[0] - r.mean_length[1]);
  }
  const auto s = summarize("diff", diff);
  EXPECT_LE(std::abs(s.mean), 3 * s.half_width + 1e-3);
}

TEST(Compare, OnePolicyGivesOneReportPerSeed) {
  const auto t = compare(two, {CmuPolicy{two}}, 5000, 100, {1, 2, 3, 4, 5});
  EXPECT_EQ(t.reports.size(), 5u);
  EXPECT_EQ(t.summaries.size(), 1u);
}

TEST(Simulate, PinnedServerDepartureMean) {
  // a queue held at x jobs: one departure draw per slot, then refill to x
  const double q = 0.45;
  const DepartureSampler s(q, 20);
  Rng rng = make_stream(3, stream::departures_base);
  for (State x : {1, 5, 20}) {
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < n; ++t) {
      const double d = s(x, uniform01(rng));
      sum += d;
      sq += d * d;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_LE(std::abs(mean - q), 3 * std::sqrt(var / n)) << "x=" << x;
  }
}
