#pragma once

// Whittle indices for one processor-sharing queue.
//
// For a tax lambda on passivity and a threshold x (active on {0..x}), the
// relative values V and average cost beta solve
//
//   V(y) = C y          - beta + sum_z p_a(z|y) V(z),   y <= x
//   V(y) = C y + lambda - beta + sum_z p_b(z|y) V(z),   y >  x
//   V(0) = 0
//
// on the truncated range {0..N}. The index of x is the lambda at which
// activating and resting x cost the same:
//
//   Delta(lambda) = sum_j p_a(j|x) V(j) - sum_j p_b(j|x) V(j) - lambda = 0,
//
// found by the incremental update lambda += gamma * Delta(lambda).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psw/model.hpp"

namespace psw {

struct ValueSolution {
  double lambda = 0.0;
  State threshold_x = 0;
  State N = 0;
  std::vector<double> V;  ///< relative values on {0..N}, V[0] = 0
  double beta = 0.0;
};

/// (V, beta) of an arbitrary stationary single-queue policy, affine in lambda:
/// V = V_hold + lambda * V_tax, beta = beta_hold + lambda * beta_tax.
/// The matrix depends only on the policy, so one factorization serves every lambda.
class PolicyValueSystem {
 public:
  /// `active[y]` selects the action at state y for y in {0..N}.
  PolicyValueSystem(const SingleQueueKernel& kernel, double cost_c, std::vector<char> active)
      : active_(std::move(active)) {
    const State N = kernel.buffer();
    if (static_cast<State>(active_.size()) != N + 1)
      throw std::invalid_argument("PolicyValueSystem: policy size must be N+1");
    const Eigen::Index n = N + 2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    std::vector<double> row(static_cast<std::size_t>(N) + 1);
    for (State y = 0; y <= N; ++y) {
      std::fill(row.begin(), row.end(), 0.0);
      kernel.scatter(y, active_[y] != 0, 1.0, row);
      for (State z = 0; z <= N; ++z) A(y, z) = -row[z];
      A(y, y) += 1.0;
      A(y, N + 1) = 1.0;
      rhs(y, 0) = cost_c * y;
      rhs(y, 1) = active_[y] ? 0.0 : 1.0;
    }
    A(N + 1, 0) = 1.0;

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const Eigen::MatrixXd sol = lu.solve(rhs);
    if (!sol.allFinite() || (A * sol - rhs).cwiseAbs().maxCoeff() > 1e-6 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      throw std::runtime_error("PolicyValueSystem: singular value system");

    hold_.assign(sol.col(0).data(), sol.col(0).data() + N + 1);
    tax_.assign(sol.col(1).data(), sol.col(1).data() + N + 1);
    beta_hold_ = sol(N + 1, 0);
    beta_tax_ = sol(N + 1, 1);
  }

  State N() const { return static_cast<State>(hold_.size()) - 1; }
  const std::vector<char>& active() const { return active_; }

  double beta(double lambda) const { return beta_hold_ + lambda * beta_tax_; }
  double value(State y, double lambda) const { return hold_[y] + lambda * tax_[y]; }

  std::vector<double> values(double lambda) const {
    std::vector<double> v(hold_.size());
    for (std::size_t y = 0; y < v.size(); ++y) v[y] = hold_[y] + lambda * tax_[y];
    v[0] = 0.0;
    return v;
  }

 private:
  std::vector<char> active_;
  std::vector<double> hold_, tax_;
  double beta_hold_ = 0.0, beta_tax_ = 0.0;
};

inline std::vector<char> threshold_mask(State threshold_x, State N) {
  std::vector<char> mask(static_cast<std::size_t>(N) + 1, 0);
  for (State y = 0; y <= std::min(threshold_x, N); ++y) mask[y] = 1;
  return mask;
}

inline ValueSolution solve_value(double lambda, State threshold_x, const ServerParams& server,
                                 double p, State N) {
  if (threshold_x < 0 || N < threshold_x + 1)
    throw std::invalid_argument("solve_value: need 0 <= threshold_x and N >= threshold_x + 1");
  const SingleQueueKernel kernel(server.q, p, N);
  const PolicyValueSystem sys(kernel, server.cost_c, threshold_mask(threshold_x, N));
  return {lambda, threshold_x, N, sys.values(lambda), sys.beta(lambda)};
}

/// Largest absolute violation of the defining equations of `sol`.
inline double value_equation_residual(const ValueSolution& sol, const ServerParams& server,
                                      double p) {
  const SingleQueueKernel kernel(server.q, p, sol.N);
  double worst = std::abs(sol.V[0]);
  for (State y = 0; y <= sol.N; ++y) {
    const bool act = y <= sol.threshold_x;
    const double rhs = stage_cost(y, act, sol.lambda, server.cost_c) - sol.beta +
                       kernel.expect(y, act, sol.V);
    worst = std::max(worst, std::abs(sol.V[y] - rhs));
  }
  return worst;
}

/// Delta(lambda) at state x, with V from solve_value(lambda, x, ...).
inline double index_residual(double lambda, State x, const ServerParams& server, double p,
                             State N) {
  const ValueSolution sol = solve_value(lambda, x, server, p, N);
  const SingleQueueKernel kernel(server.q, p, N);
  return kernel.expect(x, true, sol.V) - kernel.expect(x, false, sol.V) - lambda;
}

struct IndexIterationConfig {
  double gamma = 0.1;
  double tol = 1e-6;
  long max_iter = 100'000;
  double lambda0 = 0.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  }
};

class IndexNotConverged : public std::runtime_error {
 public:
  IndexNotConverged(State x, double last_lambda, double last_residual, long iterations)
      : std::runtime_error(describe(x, last_lambda, last_residual, iterations)),
        x_(x), last_lambda_(last_lambda), last_residual_(last_residual) {}

  State state() const { return x_; }
  double last_lambda() const { return last_lambda_; }
  double last_residual() const { return last_residual_; }

 private:
  static std::string describe(State x, double l, double r, long it) {
    std::ostringstream os;
    os << "index iteration for x=" << x << " did not converge after " << it
       << " steps (lambda=" << l << ", residual=" << r << ")";
    return os.str();
  }
  State x_;
  double last_lambda_, last_residual_;
};

struct IndexIterate {
  double lambda;
  double residual;
  long iterations;
};

inline IndexIterate compute_index_detailed(State x, const ServerParams& server, double p,
                                           const IndexIterationConfig& it, State N) {
  it.validate();
  if (x < 0 || N < x + 1) throw std::invalid_argument("compute_index: need N >= x + 1");
  const SingleQueueKernel kernel(server.q, p, N);
  const PolicyValueSystem sys(kernel, server.cost_c, threshold_mask(x, N));

  // Delta is affine in lambda through V; evaluate it from the cached solution.
  auto delta = [&](double lambda) {
    const auto& row = kernel.departures()[x];
    double act = 0.0, pas = 0.0;
    for (State d = 0; d <= x; ++d) {
      const State stay = x - d;
      act += row[d] * (p * sys.value(stay + 1, lambda) + (1.0 - p) * sys.value(stay, lambda));
      pas += row[d] * sys.value(stay, lambda);
    }
    return act - pas - lambda;
  };

  double lambda = it.lambda0;
  for (long t = 1; t <= it.max_iter; ++t) {
    const double next = lambda + it.gamma * delta(lambda);
    const double step = std::abs(next - lambda);
    lambda = next;
    if (!std::isfinite(lambda)) break;
    if (step <= it.tol) {
      const double res = index_residual(lambda, x, server, p, N);
      if (std::abs(res) > 10.0 * it.tol) throw IndexNotConverged(x, lambda, res, t);
      return {lambda, res, t};
    }
  }
  throw IndexNotConverged(x, lambda, std::isfinite(lambda) ? delta(lambda) : lambda, it.max_iter);
}

inline double compute_index(State x, const ServerParams& server, double p,
                            const IndexIterationConfig& it, State N) {
  return compute_index_detailed(x, server, p, it, N).lambda;
}

inline State default_truncation(State x_max, State buffer) {
  return std::max(2 * x_max, buffer);
}

/// Per-server indices on {0..x_max}; linear extrapolation from the last two
/// entries answers queries beyond x_max.
class IndexTable {
 public:
  IndexTable() = default;
  IndexTable(State x_max, std::vector<std::vector<double>> indices)
      : x_max_(x_max), indices_(std::move(indices)) {
    for (const auto& col : indices_)
      if (static_cast<State>(col.size()) != x_max_ + 1)
        throw std::invalid_argument("IndexTable: every server needs x_max+1 entries");
  }

  State x_max() const { return x_max_; }
  std::size_t servers() const { return indices_.size(); }
  const std::vector<double>& server(std::size_t i) const { return indices_[i]; }

  double operator()(std::size_t server, State x) const {
    const auto& col = indices_[server];
    if (x <= x_max_) return col[x];
    if (x_max_ == 0) return col[0];
    const double slope = col[x_max_] - col[x_max_ - 1];
    return col[x_max_] + slope * static_cast<double>(x - x_max_);
  }

  friend bool operator==(const IndexTable&, const IndexTable&) = default;

 private:
  State x_max_ = 0;
  std::vector<std::vector<double>> indices_;
};

class IndexTableError : public std::runtime_error {
 public:
  IndexTableError(std::size_t server, State x, const std::string& why)
      : std::runtime_error("index table: server " + std::to_string(server + 1) + ", x=" +
                           std::to_string(x) + ": " + why),
        server_(server), x_(x) {}
  std::size_t server() const { return server_; }
  State state() const { return x_; }

 private:
  std::size_t server_;
  State x_;
};

inline IndexTable build_index_table(const SystemConfig& cfg, State x_max,
                                    const IndexIterationConfig& it, State N) {
  if (x_max < 1) throw std::invalid_argument("build_index_table: x_max must be >= 1");
  if (N < x_max + 1) throw std::invalid_argument("build_index_table: need N >= x_max + 1");
  std::vector<std::vector<double>> cols;
  cols.reserve(cfg.size());
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    std::vector<double> col(static_cast<std::size_t>(x_max) + 1);
    for (State x = 0; x <= x_max; ++x) {
      try {
        col[x] = compute_index(x, cfg.servers[i], cfg.arrival_p, it, N);
      } catch (const std::exception& e) {
        throw IndexTableError(i, x, e.what());
      }
    }
    cols.push_back(std::move(col));
  }
  return IndexTable(x_max, std::move(cols));
}

inline IndexTable build_index_table(const SystemConfig& cfg, State x_max,
                                    const IndexIterationConfig& it = {}) {
  return build_index_table(cfg, x_max, it, default_truncation(x_max, cfg.buffer));
}

}  // namespace psw
