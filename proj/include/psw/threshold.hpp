#pragma once

// Single-queue chains induced by threshold policies (active on {0..k}).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "psw/model.hpp"

namespace psw {

/// Active exactly on {0..k}; k = -1 is passive everywhere.
struct ThresholdPolicy {
  int k = -1;
  bool active(State x) const { return x <= k; }
};

/// Transition matrix of a threshold-k policy on its recurrent class {0..k+1}.
struct RecurrentChain {
  int k = 0;
  Eigen::MatrixXd P;

  Eigen::Index size() const { return P.rows(); }
};

struct StationaryDistribution {
  std::vector<double> probs;

  double operator[](std::size_t i) const { return probs[i]; }
  std::size_t size() const { return probs.size(); }
  double mean() const {
    double m = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) m += static_cast<double>(j) * probs[j];
    return m;
  }
};

inline RecurrentChain threshold_chain(int k, double q, double p) {
  if (k < 0) throw std::invalid_argument("threshold_chain: k must be >= 0");
  const State top = k + 1;
  const SingleQueueKernel kernel(q, p, top);
  RecurrentChain chain{k, Eigen::MatrixXd::Zero(top + 1, top + 1)};
  for (State x = 0; x <= top; ++x) {
    auto row = chain.P.row(x);
    kernel.scatter(x, x <= k, 1.0, row);
  }
  return chain;
}

/// Solves (P^T - I) pi = 0 with the last balance equation replaced by sum(pi) = 1.
inline StationaryDistribution stationary_distribution(const Eigen::MatrixXd& P) {
  const Eigen::Index n = P.rows();
  if (n == 0 || P.cols() != n) throw std::invalid_argument("stationary_distribution: bad matrix");
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw std::runtime_error("stationary_distribution: chain has more than one closed class");
  const Eigen::VectorXd pi = lu.solve(rhs);

  if (!pi.allFinite() || (A * pi - rhs).cwiseAbs().maxCoeff() > 1e-9)
    throw std::runtime_error("stationary_distribution: singular or malformed chain");

  StationaryDistribution out;
  out.probs.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // round-off can leave tiny negatives on states of vanishing mass
    out.probs[i] = std::max(0.0, pi(i));
    total += out.probs[i];
  }
  for (auto& v : out.probs) v /= total;
  return out;
}

inline StationaryDistribution stationary_distribution(const RecurrentChain& chain) {
  return stationary_distribution(chain.P);
}

/// Power iteration from the uniform distribution; an independent route for cross-checks.
inline StationaryDistribution stationary_by_power_iteration(const Eigen::MatrixXd& P,
                                                            double tol = 1e-14,
                                                            long max_iter = 10'000'000) {
  const Eigen::Index n = P.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (long it = 0; it < max_iter; ++it) {
    Eigen::RowVectorXd next = pi * P;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = next;
    if (change <= tol) break;
  }
  StationaryDistribution out;
  out.probs.assign(pi.data(), pi.data() + n);
  return out;
}

/// Stationary mass on the active states {0..k}.
inline double cumulative_active_mass(int k, double q, double p) {
  const auto pi = stationary_distribution(threshold_chain(k, q, p));
  return 1.0 - pi.probs.back();
}

/// The three matrices behind the stochastic-dominance comparison of thresholds
/// k and k+1. States are labelled by job count on {0..k+2}; the threshold-k
/// chain has no (k+2)-job state, so its row and column there are zero.
struct DominanceMatrices {
  Eigen::MatrixXd P1;  ///< threshold k, zero-padded
  Eigen::MatrixXd P2;  ///< threshold k+1
  Eigen::MatrixXd U;   ///< lower-triangular all-ones

  /// P1 U <= P2 U elementwise within `tol`.
  bool dominates(double tol = 1e-12) const {
    const Eigen::MatrixXd lhs = P1 * U;
    const Eigen::MatrixXd rhs = P2 * U;
    return ((lhs - rhs).array() <= tol).all();
  }
};

inline DominanceMatrices dominance_matrices(int k, double q, double p) {
  if (k < 0) throw std::invalid_argument("dominance_matrices: k must be >= 0");
  const Eigen::Index n = k + 3;
  DominanceMatrices m;
  m.P1 = Eigen::MatrixXd::Zero(n, n);
  m.P1.topLeftCorner(k + 2, k + 2) = threshold_chain(k, q, p).P;
  m.P2 = threshold_chain(k + 1, q, p).P;
  m.U = Eigen::MatrixXd::Ones(n, n).triangularView<Eigen::Lower>();
  return m;
}

inline bool dominance_check(int k, double q, double p) {
  return dominance_matrices(k, q, p).dominates();
}

/// Long-run holding cost of a threshold chain and the stationary mass on its
/// single recurrent passive state; the average cost is affine in lambda.
struct ThresholdCost {
  int k = -1;
  double mean_holding = 0.0;  ///< C * E[X]
  double passive_mass = 1.0;  ///< pi^k(k+1), or 1 for k = -1

  double at(double lambda) const { return mean_holding + lambda * passive_mass; }
};

inline ThresholdCost threshold_cost_terms(int k, double cost_c, double q, double p) {
  if (k < -1) throw std::invalid_argument("threshold_cost_terms: k must be >= -1");
  // All-passive: the queue drains and sits at 0, paying lambda every slot.
  if (k == -1) return {-1, 0.0, 1.0};
  const auto pi = stationary_distribution(threshold_chain(k, q, p));
  return {k, cost_c * pi.mean(), pi.probs.back()};
}

inline double threshold_average_cost(int k, double lambda, double cost_c, double q, double p) {
  return threshold_cost_terms(k, cost_c, q, p).at(lambda);
}

/// Threshold costs for k = -1..k_max, reusable across many lambda values.
class ThresholdCostCurve {
 public:
  ThresholdCostCurve(double cost_c, double q, double p, int k_max) {
    terms_.reserve(static_cast<std::size_t>(k_max) + 2);
    for (int k = -1; k <= k_max; ++k) terms_.push_back(threshold_cost_terms(k, cost_c, q, p));
  }

  const std::vector<ThresholdCost>& terms() const { return terms_; }

  struct Best {
    int k;
    double beta;
  };

  /// min_k beta_k(lambda); the smallest minimizing k on ties.
  Best minimum(double lambda) const {
    Best best{-2, std::numeric_limits<double>::infinity()};
    for (const auto& t : terms_) {
      const double v = t.at(lambda);
      if (v < best.beta) best = {t.k, v};
    }
    return best;
  }

 private:
  std::vector<ThresholdCost> terms_;
};

}  // namespace psw
