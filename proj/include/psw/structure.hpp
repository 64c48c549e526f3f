#pragma once

// Numerical certificates for the structural results: threshold optimality,
// indexability, monotone/convex relative values, the f(x) inequality,
// stationary-mass monotonicity and the shape of the optimal cost curve.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psw/dp.hpp"
#include "psw/model.hpp"
#include "psw/threshold.hpp"

namespace psw::check {

struct CheckResult {
  std::string name;
  long checked = 0;
  long violations = 0;
  std::string first_failure;

  bool pass() const { return violations == 0 && checked > 0; }

  void fail(const std::string& what) {
    if (violations++ == 0) first_failure = what;
  }
  void merge(const CheckResult& other) {
    checked += other.checked;
    if (other.violations > 0 && violations == 0) first_failure = other.first_failure;
    violations += other.violations;
  }
};

inline std::vector<double> grid(double from, double to, double step) {
  std::vector<double> g;
  const long n = std::lround((to - from) / step);
  for (long i = 0; i <= n; ++i) g.push_back(from + step * static_cast<double>(i));
  return g;
}

/// Single-queue optimal solutions along a lambda grid.
struct LambdaSweep {
  ServerParams server;
  double p = 0.0;
  State N = 0;
  std::vector<SingleQueueSolution> solutions;

  /// States checked for structure; the top half of the truncated range is
  /// excluded to keep clear of boundary effects.
  State limit() const { return N / 2; }
};

inline LambdaSweep sweep_lambda(const ServerParams& server, double p, State N,
                                const std::vector<double>& lambdas, const RviOptions& opts = {}) {
  LambdaSweep s{server, p, N, {}};
  s.solutions.reserve(lambdas.size());
  for (double l : lambdas) s.solutions.push_back(single_queue_rvi(l, server, p, N, opts));
  return s;
}

inline std::string describe(const LambdaSweep& s, double lambda) {
  std::ostringstream os;
  os << "(q=" << s.server.q << ", p=" << s.p << ", C=" << s.server.cost_c << ", lambda=" << lambda
     << ")";
  return os.str();
}

/// Active set within {0..limit} is {0..k} for some k >= -1.
inline CheckResult threshold_structure(const LambdaSweep& s) {
  CheckResult r{"threshold structure"};
  for (const auto& sol : s.solutions) {
    ++r.checked;
    if (!sol.threshold_on(s.limit())) r.fail("non-threshold active set at " + describe(s, sol.lambda));
  }
  return r;
}

/// k(lambda) non-decreasing along the grid.
inline CheckResult indexability(const LambdaSweep& s) {
  CheckResult r{"indexability"};
  std::optional<int> prev;
  for (const auto& sol : s.solutions) {
    const auto k = sol.threshold_on(s.limit());
    ++r.checked;
    if (!k) {
      r.fail("no threshold at " + describe(s, sol.lambda));
      continue;
    }
    if (prev && *k < *prev)
      r.fail("threshold drops from " + std::to_string(*prev) + " to " + std::to_string(*k) +
             " at " + describe(s, sol.lambda));
    prev = k;
  }
  return r;
}

/// V non-decreasing with non-decreasing first differences on the recurrent
/// range {0..k+1} (k = -1 gives {0}).
inline CheckResult value_structure(const LambdaSweep& s, double slack = 1e-9) {
  CheckResult r{"value monotone and convex"};
  for (const auto& sol : s.solutions) {
    const int k = sol.threshold_on(s.limit()).value_or(s.limit());
    const State top = std::min<State>(k + 1, s.limit());
    ++r.checked;
    for (State x = 0; x < top; ++x) {
      if (sol.V[x + 1] - sol.V[x] < -slack) {
        r.fail("V decreases at x=" + std::to_string(x) + " " + describe(s, sol.lambda));
        break;
      }
      if (x + 2 <= top && (sol.V[x + 2] - sol.V[x + 1]) - (sol.V[x + 1] - sol.V[x]) < -slack) {
        r.fail("V differences decrease at x=" + std::to_string(x) + " " + describe(s, sol.lambda));
        break;
      }
    }
  }
  return r;
}

/// f(x+1) - f(x) >= -slack for every x with x+1 <= limit.
inline CheckResult f_inequality(const LambdaSweep& s, double slack = 1e-9) {
  CheckResult r{"f(x+1) - f(x) >= 0"};
  for (const auto& sol : s.solutions) {
    const FDiagnostic f = f_diagnostic(sol, s.server, s.p);
    ++r.checked;
    for (State x = 1; x + 1 <= s.limit(); ++x) {
      const double d = f.at(x + 1) - f.at(x);
      if (d < -slack) {
        std::ostringstream os;
        os << "f(" << x + 1 << ")-f(" << x << ")=" << d << " " << describe(s, sol.lambda);
        r.fail(os.str());
        break;
      }
    }
  }
  return r;
}

/// sum_{j<=k} pi^k(j) non-decreasing and P1 U <= P2 U for k = 0..k_max.
inline CheckResult stationary_mass(double q, double p, int k_max) {
  CheckResult r{"stationary mass monotone"};
  double prev = -1.0;
  for (int k = 0; k <= k_max; ++k) {
    const double m = cumulative_active_mass(k, q, p);
    ++r.checked;
    if (m < prev - 1e-12) {
      std::ostringstream os;
      os << "mass drops at k=" << k << " (q=" << q << ", p=" << p << ")";
      r.fail(os.str());
    }
    prev = m;
  }
  return r;
}

inline CheckResult dominance(double q, double p, int k_max) {
  CheckResult r{"stochastic dominance"};
  for (int k = 0; k <= k_max; ++k) {
    ++r.checked;
    if (!dominance_check(k, q, p)) {
      std::ostringstream os;
      os << "P1 U <= P2 U fails at k=" << k << " (q=" << q << ", p=" << p << ")";
      r.fail(os.str());
    }
  }
  return r;
}

/// lambda -> min_k beta_k(lambda): non-decreasing, concave, unit-step increments <= 1.
inline CheckResult beta_shape(const ServerParams& server, double p, int k_max,
                              const std::vector<double>& lambdas, double slack = 1e-9) {
  CheckResult r{"optimal cost concave non-decreasing"};
  const ThresholdCostCurve curve(server.cost_c, server.q, p, k_max);
  std::vector<double> beta;
  for (double l : lambdas) beta.push_back(curve.minimum(l).beta);
  const double step = lambdas.size() > 1 ? lambdas[1] - lambdas[0] : 1.0;
  const long unit = std::lround(1.0 / step);
  for (std::size_t i = 0; i < beta.size(); ++i) {
    ++r.checked;
    std::ostringstream os;
    os << " at lambda=" << lambdas[i] << " (q=" << server.q << ", p=" << p << ", C=" << server.cost_c
       << ")";
    if (i + 1 < beta.size() && beta[i + 1] - beta[i] < -slack) r.fail("decreasing" + os.str());
    if (i + 2 < beta.size() && beta[i + 2] - 2.0 * beta[i + 1] + beta[i] > slack)
      r.fail("not concave" + os.str());
    if (unit > 0 && i + unit < beta.size() && beta[i + unit] - beta[i] > 1.0 + slack)
      r.fail("unit increment above 1" + os.str());
  }
  return r;
}

/// |E[D] - q| <= 1e-12 for x = 1..x_max.
inline CheckResult departure_mean(double q, State x_max) {
  CheckResult r{"departure mean equals q"};
  for (State x = 1; x <= x_max; ++x) {
    ++r.checked;
    const double m = departure_pmf(x, q).mean();
    if (std::abs(m - q) > 1e-12) {
      std::ostringstream os;
      os << "mean " << m << " != " << q << " at x=" << x;
      r.fail(os.str());
    }
  }
  return r;
}

}  // namespace psw::check
