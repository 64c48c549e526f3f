#pragma once

// Test-only reference computations. Nothing here calls the code path it is
// used to check: probabilities come from the closed-form binomial, indices
// from bisection on the residual, and grid indices from the DP solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <map>
#include <stdexcept>
#include <vector>

#include "psw/dp.hpp"
#include "psw/model.hpp"
#include "psw/whittle.hpp"

namespace psw::oracle {

inline double binomial_coefficient(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

/// P(d departures | x jobs) straight from the binomial formula.
inline double departure_prob(int x, int d, double q) {
  if (x == 0) return d == 0 ? 1.0 : 0.0;
  const double r = q / x;
  return binomial_coefficient(x, d) * std::pow(r, d) * std::pow(1.0 - r, x - d);
}

/// Next-state law by enumerating every (departures, arrival) pair.
inline std::map<int, double> enumerate_next_state(int x, double q, double p, bool active,
                                                  int buffer) {
  std::map<int, double> out;
  for (int d = 0; d <= x; ++d) {
    for (int xi = 0; xi <= 1; ++xi) {
      const double pr = departure_prob(x, d, q) * (xi ? p : 1.0 - p);
      const int admitted = active ? xi : 0;
      const int next = std::min(x - d + admitted, buffer);
      out[next] += pr;
    }
  }
  for (auto it = out.begin(); it != out.end();) it = it->second == 0.0 ? out.erase(it) : std::next(it);
  return out;
}

struct Bracket {
  double lo, hi;
};

/// Scans [-50, 50] at step 0.5 for the sign change of the residual, widening
/// geometrically when the root lies outside.
inline Bracket scan_bracket(State x, const ServerParams& s, double p, State N) {
  auto f = [&](double l) { return index_residual(l, x, s, p, N); };
  double lo = -50.0, hi = 50.0;
  while (f(lo) <= 0.0) lo *= 2.0;
  while (f(hi) >= 0.0) hi *= 2.0;
  double prev = lo, fprev = f(lo);
  const double step = (hi - lo) / std::ceil((hi - lo) / 0.5);
  for (double l = lo + step; l <= hi + 1e-9; l += step) {
    const double fl = f(l);
    if ((fprev > 0.0) != (fl > 0.0)) return {prev, l};
    prev = l;
    fprev = fl;
  }
  throw std::runtime_error("scan_bracket: no sign change");
}

/// Number of sign changes of the residual on the scan grid of [lo, hi].
inline int count_sign_changes(State x, const ServerParams& s, double p, State N, double lo,
                              double hi, double step) {
  int changes = 0;
  double fprev = index_residual(lo, x, s, p, N);
  for (double l = lo + step; l <= hi + 1e-9; l += step) {
    const double fl = index_residual(l, x, s, p, N);
    if ((fprev > 0.0) != (fl > 0.0)) ++changes;
    fprev = fl;
  }
  return changes;
}

/// Root of the residual by 60 bisection halvings of the scanned bracket.
inline double bisection_index(State x, const ServerParams& s, double p, State N) {
  auto [lo, hi] = scan_bracket(x, s, p, N);
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (index_residual(mid, x, s, p, N) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Smallest lambda on the grid {step * j} at which the optimal single-queue
/// policy activates x. Activity of x is monotone in lambda, so the grid is
/// bisected rather than swept.
inline double dp_grid_index(State x, const ServerParams& s, double p, State N, double step,
                            const RviOptions& opts = {}) {
  auto active_at = [&](long j) {
    return single_queue_rvi(step * static_cast<double>(j), s, p, N, opts).active[x] != 0;
  };
  long lo = -64, hi = 64;
  while (active_at(lo)) lo *= 2;
  while (!active_at(hi)) hi *= 2;
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    (active_at(mid) ? hi : lo) = mid;
  }
  return step * static_cast<double>(hi);
}

}  // namespace psw::oracle
