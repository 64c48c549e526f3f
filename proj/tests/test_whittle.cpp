#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "psw/threshold.hpp"
#include "psw/whittle.hpp"

using namespace psw;

namespace {
const ServerParams fast{0.55, 30.0};
}

TEST(SolveValue, SatisfiesItsEquations) {
  for (double lambda : {-10.0, 0.0, 4.5, 250.0}) {
    for (State x : {0, 1, 5, 20}) {
      const auto sol = solve_value(lambda, x, fast, 0.4, 60);
      EXPECT_EQ(sol.V[0], 0.0);
      EXPECT_EQ(sol.V.size(), 61u);
      EXPECT_LT(value_equation_residual(sol, fast, 0.4), 1e-8) << lambda << ' ' << x;
    }
  }
}

TEST(SolveValue, AverageCostMatchesStationaryChain) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 0.9), ul(-20.0, 20.0), uc(0.5, 10.0);
  for (int trial = 0; trial < 40; ++trial) {
    const ServerParams s{u(gen), uc(gen)};
    const double p = u(gen), lambda = ul(gen);
    const State k = trial % 15;
    const auto sol = solve_value(lambda, k, s, p, k + 1 + trial % 7);
    EXPECT_NEAR(sol.beta, threshold_average_cost(k, lambda, s.cost_c, s.q, p), 1e-8)
        << "q=" << s.q << " p=" << p << " k=" << k;
  }
}

TEST(SolveValue, RejectsTooSmallTruncation) {
  EXPECT_THROW(solve_value(0.0, 5, fast, 0.4, 5), std::invalid_argument);
  EXPECT_THROW(solve_value(0.0, -1, fast, 0.4, 5), std::invalid_argument);
}

TEST(PolicyValueSystem, AffineInLambda) {
  const SingleQueueKernel kernel(0.5, 0.4, 30);
  std::vector<char> mask(31, 0);
  for (int y : {0, 1, 2, 5, 7}) mask[y] = 1;  // not a threshold policy
  const PolicyValueSystem sys(kernel, 2.0, mask);
  for (double l : {-3.0, 0.0, 2.0}) {
    const auto v = sys.values(l);
    for (State y = 0; y <= 30; ++y) {
      const bool act = mask[y] != 0;
      const double rhs = stage_cost(y, act, l, 2.0) - sys.beta(l) + kernel.expect(y, act, v);
      EXPECT_NEAR(v[y], rhs, 1e-9);
    }
  }
  EXPECT_THROW(PolicyValueSystem(kernel, 2.0, std::vector<char>(5, 1)), std::invalid_argument);
}

TEST(ComputeIndex, KnownValuesForFastServer) {
  // reference values from an independent dense solve of the same system, N = 100
  const struct {
    State x;
    double index;
  } expect[] = {{0, 21.818181818181802}, {1, 41.48041681608968}, {2, 100.55449926022801},
                {5, 313.5569923251026},  {10, 705.1248261650846}, {40, 3105.2829518494}};
  for (const auto& e : expect)
    EXPECT_NEAR(compute_index(e.x, fast, 0.4, {}, 100), e.index, 1e-4) << "x=" << e.x;
}

TEST(ComputeIndex, EmptyQueueIndexInClosedForm) {
  EXPECT_NEAR(compute_index(0, fast, 0.4, {}, 100), 240.0 / 11.0, 1e-4);
}

TEST(ComputeIndex, AgreesWithBisection) {
  for (const ServerParams s : {ServerParams{0.5, 1.0}, ServerParams{0.45, 28.0}})
    for (State x : {0, 3, 8, 15}) {
      const auto it = compute_index_detailed(x, s, 0.4, {}, 60);
      EXPECT_NEAR(it.lambda, oracle::bisection_index(x, s, 0.4, 60), 1e-4);
      EXPECT_LE(std::abs(it.residual), 1e-5);
      EXPECT_GT(it.iterations, 0);
    }
}

TEST(ComputeIndex, StartingPointDoesNotMatter) {
  IndexIterationConfig a, b;
  b.lambda0 = 500.0;
  b.gamma = 0.3;
  EXPECT_NEAR(compute_index(4, fast, 0.4, a, 80), compute_index(4, fast, 0.4, b, 80), 1e-4);
}

TEST(ComputeIndex, ReportsNonConvergence) {
  IndexIterationConfig it;
  it.max_iter = 3;
  try {
    compute_index(5, fast, 0.4, it, 50);
    FAIL() << "expected IndexNotConverged";
  } catch (const IndexNotConverged& e) {
    EXPECT_EQ(e.state(), 5);
    EXPECT_TRUE(std::isfinite(e.last_lambda()));
  }
}

TEST(ComputeIndex, ValidatesSettings) {
  IndexIterationConfig it;
  it.gamma = 0.0;
  EXPECT_THROW(compute_index(0, fast, 0.4, it, 10), std::invalid_argument);
  it = {};
  it.tol = -1.0;
  EXPECT_THROW(compute_index(0, fast, 0.4, it, 10), std::invalid_argument);
  EXPECT_THROW(compute_index(10, fast, 0.4, {}, 10), std::invalid_argument);
}

TEST(IndexTable, BuildsMonotoneColumns) {
  const SystemConfig cfg{0.4, {{0.55, 30}, {0.50, 29}, {0.45, 28}}, 100, false};
  const IndexTable t = build_index_table(cfg, 40);
  ASSERT_EQ(t.servers(), 3u);
  EXPECT_EQ(t.x_max(), 40);
  for (std::size_t i = 0; i < 3; ++i)
    for (State x = 0; x < 40; ++x) EXPECT_LE(t(i, x), t(i, x + 1) + 1e-9);
  EXPECT_NEAR(t(0, 0), 21.8182, 1e-4);
  EXPECT_NEAR(t(1, 0), 23.2, 1e-4);
  EXPECT_NEAR(t(2, 0), 24.8889, 1e-4);
  EXPECT_NEAR(t(0, 40), 3105.28, 1e-2);
}

TEST(IndexTable, ExtrapolatesLinearlyBeyondRange) {
  const IndexTable t(2, {{1.0, 3.0, 6.0}});
  EXPECT_EQ(t(0, 2), 6.0);
  EXPECT_EQ(t(0, 3), 9.0);
  EXPECT_EQ(t(0, 10), 30.0);
  EXPECT_THROW(IndexTable(2, {{1.0, 2.0}}), std::invalid_argument);
  EXPECT_EQ(IndexTable(0, {{4.0}})(0, 7), 4.0);
}

TEST(IndexTable, FailureNamesServerAndState) {
  const SystemConfig cfg{0.4, {{0.5, 1}, {0.45, 2}}, 20, false};
  IndexIterationConfig it;
  it.max_iter = 2;
  try {
    build_index_table(cfg, 5, it, 20);
    FAIL() << "expected IndexTableError";
  } catch (const IndexTableError& e) {
    EXPECT_EQ(e.server(), 0u);
    EXPECT_EQ(e.state(), 0);
    EXPECT_NE(std::string(e.what()).find("server 1"), std::string::npos);
  }
  EXPECT_THROW(build_index_table(cfg, 5, {}, 5), std::invalid_argument);
}

TEST(IndexTable, DefaultTruncation) {
  EXPECT_EQ(default_truncation(40, 100), 100);
  EXPECT_EQ(default_truncation(40, 25), 80);
}
