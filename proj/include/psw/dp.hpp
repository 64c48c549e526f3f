#pragma once

// Average-cost dynamic programming: single-queue and joint relative value
// iteration, an exhaustive policy oracle for tiny joint systems, and the
// f(x) difference diagnostic.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psw/model.hpp"
#include "psw/threshold.hpp"
#include "psw/whittle.hpp"

namespace psw {

class RviNotConverged : public std::runtime_error {
 public:
  RviNotConverged(const std::string& what, long sweeps, double span)
      : std::runtime_error(describe(what, sweeps, span)), sweeps_(sweeps), span_(span) {}
  long sweeps() const { return sweeps_; }
  double span() const { return span_; }

 private:
  static std::string describe(const std::string& what, long sweeps, double span) {
    std::ostringstream os;
    os << what << ": no convergence after " << sweeps << " sweeps (span " << span << ")";
    return os.str();
  }
  long sweeps_;
  double span_;
};

struct RviOptions {
  double tol = 1e-9;
  long max_sweeps = 2'000'000;
  /// Finish with exact policy evaluation + improvement until the greedy policy is stable.
  bool polish = true;
};

struct SingleQueueSolution {
  double lambda = 0.0;
  State N = 0;
  std::vector<double> V;     ///< V[0] = 0
  double beta = 0.0;
  std::vector<char> active;  ///< greedy action per state
  long sweeps = 0;

  /// Largest k with {0..k} active; meaningful only if the policy is a threshold policy.
  std::optional<int> threshold_on(State limit) const {
    int k = -1;
    bool seen_passive = false;
    for (State x = 0; x <= std::min(limit, N); ++x) {
      if (active[x]) {
        if (seen_passive) return std::nullopt;
        k = x;
      } else {
        seen_passive = true;
      }
    }
    return k;
  }
};

namespace detail {

struct SingleQueueBellman {
  const SingleQueueKernel& kernel;
  double cost_c;
  double lambda;

  double active_value(State x, const std::vector<double>& V) const {
    return kernel.expect(x, true, V);
  }
  double passive_value(State x, const std::vector<double>& V) const {
    return lambda + kernel.expect(x, false, V);
  }
  /// Active wins exact ties.
  bool prefers_active(State x, const std::vector<double>& V) const {
    return active_value(x, V) <= passive_value(x, V);
  }
};

}  // namespace detail

inline SingleQueueSolution single_queue_rvi(double lambda, const ServerParams& server, double p,
                                            State N, const RviOptions& opts = {}) {
  if (N < 2) throw std::invalid_argument("single_queue_rvi: N must be >= 2");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("single_queue_rvi: tol must be > 0");

  const SingleQueueKernel kernel(server.q, p, N);
  const detail::SingleQueueBellman bell{kernel, server.cost_c, lambda};
  const std::size_t n = static_cast<std::size_t>(N) + 1;

  std::vector<double> V(n, 0.0), W(n);
  double beta = 0.0, span = std::numeric_limits<double>::infinity();
  long sweep = 0;
  while (sweep < opts.max_sweeps) {
    ++sweep;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (State x = 0; x <= N; ++x) {
      W[x] = server.cost_c * x + std::min(bell.active_value(x, V), bell.passive_value(x, V));
      const double diff = W[x] - V[x];
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
    }
    beta = W[0];
    for (std::size_t x = 0; x < n; ++x) V[x] = W[x] - beta;
    span = hi - lo;
    if (span <= opts.tol) break;
  }
  if (span > opts.tol) throw RviNotConverged("single_queue_rvi", sweep, span);

  SingleQueueSolution sol{lambda, N, std::move(V), beta, std::vector<char>(n), sweep};
  for (State x = 0; x <= N; ++x) sol.active[x] = bell.prefers_active(x, sol.V);

  if (opts.polish) {
    for (int round = 0; round < 100; ++round) {
      const PolicyValueSystem sys(kernel, server.cost_c, sol.active);
      std::vector<double> exact = sys.values(lambda);
      std::vector<char> greedy(n);
      for (State x = 0; x <= N; ++x) greedy[x] = bell.prefers_active(x, exact);
      sol.V = std::move(exact);
      sol.beta = sys.beta(lambda);
      if (greedy == sol.active) break;
      sol.active = std::move(greedy);
    }
  }
  return sol;
}

/// Largest |V(x) - (Cx - beta + min(...))| over the state space.
inline double bellman_residual(const SingleQueueSolution& sol, const ServerParams& server,
                               double p) {
  const SingleQueueKernel kernel(server.q, p, sol.N);
  const detail::SingleQueueBellman bell{kernel, server.cost_c, sol.lambda};
  double worst = 0.0;
  for (State x = 0; x <= sol.N; ++x) {
    const double rhs = server.cost_c * x - sol.beta +
                       std::min(bell.active_value(x, sol.V), bell.passive_value(x, sol.V));
    worst = std::max(worst, std::abs(sol.V[x] - rhs));
  }
  return worst;
}

/// f(x) = E_x[V(x - D + xi)] - E_x[V(x - D)] for x = 1..N-1, and its first differences.
struct FDiagnostic {
  std::vector<double> f;  ///< f[i] is f(i + 1)

  State first_state() const { return 1; }
  double at(State x) const { return f[x - 1]; }

  /// differences()[i] = f(i + 2) - f(i + 1)
  std::vector<double> differences() const {
    std::vector<double> d;
    for (std::size_t i = 1; i < f.size(); ++i) d.push_back(f[i] - f[i - 1]);
    return d;
  }
};

inline FDiagnostic f_diagnostic(const SingleQueueSolution& sol, const ServerParams& server,
                                         double p) {
  const DepartureTable deps(server.q, sol.N);
  FDiagnostic out;
  for (State x = 1; x <= sol.N - 1; ++x) {
    const auto& row = deps[x];
    double acc = 0.0;
    for (State d = 0; d <= x; ++d) acc += row[d] * p * (sol.V[x + 1 - d] - sol.V[x - d]);
    out.f.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Joint system
// ---------------------------------------------------------------------------

/// Mixed-radix indexing of {0..buffer}^I.
class JointSpace {
 public:
  JointSpace(std::size_t servers, State buffer) : servers_(servers), buffer_(buffer) {
    strides_.resize(servers);
    std::size_t s = 1;
    for (std::size_t i = servers; i-- > 0;) {
      strides_[i] = s;
      s *= static_cast<std::size_t>(buffer) + 1;
    }
    size_ = s;
  }

  std::size_t servers() const { return servers_; }
  State buffer() const { return buffer_; }
  std::size_t size() const { return size_; }
  std::size_t stride(std::size_t i) const { return strides_[i]; }

  std::size_t encode(std::span<const State> x) const {
    if (x.size() != servers_) throw std::invalid_argument("JointSpace: wrong state dimension");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < servers_; ++i) {
      if (x[i] < 0 || x[i] > buffer_) throw std::out_of_range("JointSpace: state outside buffer");
      idx += static_cast<std::size_t>(x[i]) * strides_[i];
    }
    return idx;
  }

  std::vector<State> decode(std::size_t idx) const {
    std::vector<State> x(servers_);
    for (std::size_t i = 0; i < servers_; ++i) {
      x[i] = static_cast<State>(idx / strides_[i]);
      idx %= strides_[i];
    }
    return x;
  }

  State coord(std::size_t idx, std::size_t i) const {
    return static_cast<State>((idx / strides_[i]) % (static_cast<std::size_t>(buffer_) + 1));
  }

 private:
  std::size_t servers_;
  State buffer_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

struct JointSolution {
  JointSpace space{1, 1};
  std::vector<double> V;
  double beta = 0.0;
  std::vector<std::uint8_t> policy;  ///< 0-based server to activate
  std::vector<State> reference_state;
  long sweeps = 0;

  std::size_t choice(const std::vector<State>& x) const { return policy[space.encode(x)]; }
  double value(const std::vector<State>& x) const { return V[space.encode(x)]; }
};

/// Computes E^i[V | x] for every joint state x and server i: server i admits
/// the slot's arrival, every server serves independently.
class JointExpectation {
 public:
  explicit JointExpectation(const SystemConfig& cfg)
      : space_(cfg.size(), cfg.buffer), p_(cfg.arrival_p) {
    for (const auto& s : cfg.servers) deps_.emplace_back(s.q, cfg.buffer);
  }

  const JointSpace& space() const { return space_; }

  /// out[i][x] = E^i[V | x]
  void apply(const std::vector<double>& V, std::vector<std::vector<double>>& out) const {
    const std::size_t S = space_.size();
    out.resize(space_.servers());
    shifted_.resize(S);
    scratch_.resize(S);
    for (std::size_t i = 0; i < space_.servers(); ++i) {
      const std::size_t st = space_.stride(i);
      for (std::size_t x = 0; x < S; ++x) {
        const bool at_cap = space_.coord(x, i) == space_.buffer();
        shifted_[x] = p_ * V[at_cap ? x : x + st] + (1.0 - p_) * V[x];
      }
      depart_all(shifted_, out[i]);
    }
  }

 private:
  // Applies the product departure law, one axis at a time.
  void depart_all(const std::vector<double>& in, std::vector<double>& out) const {
    const std::vector<double>* src = &in;
    for (std::size_t j = 0; j < space_.servers(); ++j) {
      std::vector<double>& dst = (j % 2 == 0) ? out : scratch_;
      dst.resize(in.size());
      const std::size_t st = space_.stride(j);
      for (std::size_t x = 0; x < in.size(); ++x) {
        const State xj = space_.coord(x, j);
        const auto& row = deps_[j][xj];
        double acc = 0.0;
        for (State d = 0; d <= xj; ++d) acc += row[d] * (*src)[x - d * st];
        dst[x] = acc;
      }
      src = &dst;
    }
    if (src != &out) out = *src;
  }

  JointSpace space_;
  double p_;
  std::vector<DepartureTable> deps_;
  mutable std::vector<double> shifted_, scratch_;
};

namespace detail {

/// Lowest server index wins ties, judged with a relative slack of 1e-12.
inline std::size_t argmin_server(const std::vector<std::vector<double>>& E, std::size_t x,
                                 double& best) {
  std::size_t arg = 0;
  best = E[0][x];
  for (std::size_t i = 1; i < E.size(); ++i) {
    const double v = E[i][x];
    if (v < best - 1e-12 * (1.0 + std::abs(best))) {
      best = v;
      arg = i;
    }
  }
  return arg;
}

inline std::vector<double> joint_holding_cost(const SystemConfig& cfg, const JointSpace& space) {
  std::vector<double> c(space.size(), 0.0);
  for (std::size_t x = 0; x < space.size(); ++x)
    for (std::size_t i = 0; i < space.servers(); ++i)
      c[x] += cfg.servers[i].cost_c * space.coord(x, i);
  return c;
}

}  // namespace detail

inline JointSolution joint_rvi(const SystemConfig& cfg, const RviOptions& opts = {},
                               std::vector<State> reference_state = {}) {
  if (cfg.servers.empty()) throw std::invalid_argument("joint_rvi: no servers");
  const JointExpectation expect(cfg);
  const JointSpace& space = expect.space();
  if (reference_state.empty()) reference_state.assign(cfg.size(), 0);
  const std::size_t ref = space.encode(reference_state);
  const std::vector<double> cost = detail::joint_holding_cost(cfg, space);

  const std::size_t S = space.size();
  std::vector<double> V(S, 0.0), W(S);
  std::vector<std::vector<double>> E;
  double span = std::numeric_limits<double>::infinity(), beta = 0.0;
  long sweep = 0;
  while (sweep < opts.max_sweeps) {
    ++sweep;
    expect.apply(V, E);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t x = 0; x < S; ++x) {
      double best;
      detail::argmin_server(E, x, best);
      W[x] = cost[x] + best;
      lo = std::min(lo, W[x] - V[x]);
      hi = std::max(hi, W[x] - V[x]);
    }
    beta = W[ref];
    for (std::size_t x = 0; x < S; ++x) V[x] = W[x] - beta;
    span = hi - lo;
    if (span <= opts.tol) break;
  }
  if (span > opts.tol) throw RviNotConverged("joint_rvi", sweep, span);

  JointSolution sol{space, std::move(V), beta, std::vector<std::uint8_t>(S), reference_state, sweep};
  expect.apply(sol.V, E);
  for (std::size_t x = 0; x < S; ++x) {
    double best;
    sol.policy[x] = static_cast<std::uint8_t>(detail::argmin_server(E, x, best));
  }
  return sol;
}

struct BruteForceResult {
  std::vector<std::uint8_t> policy;  ///< best policy, indexed like JointSpace
  double beta = 0.0;
  std::vector<double> betas;         ///< average cost of every enumerated policy
  std::size_t optimal_count = 0;     ///< policies within 1e-10 of the best cost

  std::size_t evaluated() const { return betas.size(); }
};

class StateSpaceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive search over every stationary server-selection map. Among
/// cost-optimal maps (which differ only on transient states) the one with the
/// smallest relative values wins, since that is the map the Bellman argmin picks.
inline BruteForceResult brute_force_policy_search(const SystemConfig& cfg,
                                                  std::size_t max_policies = 1u << 20) {
  const JointSpace space(cfg.size(), cfg.buffer);
  const std::size_t S = space.size(), I = cfg.size();
  double count = std::pow(static_cast<double>(I), static_cast<double>(S));
  if (count > static_cast<double>(max_policies)) {
    std::ostringstream os;
    os << "brute_force_policy_search: " << I << "^" << S << " = " << count
       << " policies exceeds the limit of " << max_policies;
    throw StateSpaceTooLarge(os.str());
  }

  // rows[x * I + i] = sparse transition row from x when server i is active
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(S * I);
  {
    const JointExpectation expect(cfg);
    std::vector<double> unit(S, 0.0);
    std::vector<std::vector<double>> E;
    for (std::size_t y = 0; y < S; ++y) {
      unit[y] = 1.0;
      expect.apply(unit, E);
      for (std::size_t x = 0; x < S; ++x)
        for (std::size_t i = 0; i < I; ++i)
          if (E[i][x] != 0.0) rows[x * I + i].emplace_back(y, E[i][x]);
      unit[y] = 0.0;
    }
  }
  const std::vector<double> cost = detail::joint_holding_cost(cfg, space);

  BruteForceResult res;
  res.beta = std::numeric_limits<double>::infinity();
  double best_bias = std::numeric_limits<double>::infinity();
  const auto total = static_cast<std::size_t>(count);
  res.betas.reserve(total);

  std::vector<std::uint8_t> pol(S, 0);
  Eigen::MatrixXd P(S, S);
  for (std::size_t n = 0; n < total; ++n) {
    P.setZero();
    for (std::size_t x = 0; x < S; ++x)
      for (const auto& [y, pr] : rows[x * I + pol[x]]) P(x, y) += pr;
    const StationaryDistribution pi = stationary_distribution(P);
    double beta = 0.0;
    for (std::size_t x = 0; x < S; ++x) beta += pi.probs[x] * cost[x];
    res.betas.push_back(beta);

    if (beta < res.beta - 1e-10) {
      res.beta = beta;
      best_bias = std::numeric_limits<double>::infinity();
    }
    if (beta <= res.beta + 1e-10) {
      // relative values h with h(0) = 0: (I - P) h + beta 1 = c
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - P;
      Eigen::VectorXd rhs(S);
      for (std::size_t x = 0; x < S; ++x) rhs(x) = cost[x] - beta;
      A.row(0).setZero();
      A(0, 0) = 1.0;
      rhs(0) = 0.0;
      const Eigen::VectorXd h = A.partialPivLu().solve(rhs);
      const double bias = h.sum();
      if (bias < best_bias - 1e-9) {
        best_bias = bias;
        res.policy = pol;
      }
      res.beta = std::min(res.beta, beta);
    }

    for (std::size_t x = 0; x < S; ++x) {
      if (++pol[x] < I) break;
      pol[x] = 0;
    }
  }
  res.optimal_count = static_cast<std::size_t>(std::count_if(
      res.betas.begin(), res.betas.end(), [&](double b) { return b <= res.beta + 1e-10; }));
  return res;
}

}  // namespace psw
