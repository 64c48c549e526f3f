#pragma once

// Queue model: egalitarian processor-sharing departures, Bernoulli arrivals,
// buffer clamping, stage cost, configuration checks and the drift certificate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace psw {

/// Queue length (number of resident jobs).
using State = int;

struct ServerParams {
  double q = 0.5;       ///< service capacity: mean departures per slot
  double cost_c = 1.0;  ///< holding cost per job per slot
};

struct SystemConfig {
  double arrival_p = 0.4;
  std::vector<ServerParams> servers;
  State buffer = 100;
  bool strict_stability_mode = false;

  std::size_t size() const { return servers.size(); }

  double q_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : servers) m = std::min(m, s.q);
    return m;
  }
};

/// Probability mass over a finite, ascending set of distinct non-negative states.
class Pmf {
 public:
  struct Entry {
    State state;
    double prob;
  };

  Pmf() = default;

  /// Takes ownership of `entries`; they must be sorted, distinct, non-negative
  /// and sum to one within 1e-12 (a deviation below that is renormalized away).
  explicit Pmf(std::vector<Entry> entries) : entries_(std::move(entries)) {
    double total = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.state < 0) throw std::invalid_argument("Pmf: negative state");
      if (i > 0 && entries_[i - 1].state >= e.state)
        throw std::invalid_argument("Pmf: states must be distinct and ascending");
      if (!(e.prob >= 0.0 && e.prob <= 1.0 + 1e-15))
        throw std::invalid_argument("Pmf: probability outside [0,1]");
      total += e.prob;
    }
    const double dev = std::abs(total - 1.0);
    if (dev > 1e-12) {
      std::ostringstream os;
      os << "Pmf: mass sums to " << total << " (deviation " << dev << ")";
      throw std::logic_error(os.str());
    }
    if (dev > 0.0)
      for (auto& e : entries_) e.prob /= total;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  double operator()(State s) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), s,
                               [](const Entry& e, State v) { return e.state < v; });
    return (it != entries_.end() && it->state == s) ? it->prob : 0.0;
  }

  double mean() const {
    double m = 0.0;
    for (const auto& e : entries_) m += e.state * e.prob;
    return m;
  }

  double total() const {
    double t = 0.0;
    for (const auto& e : entries_) t += e.prob;
    return t;
  }

  /// P(X <= s)
  double cdf(State s) const {
    double c = 0.0;
    for (const auto& e : entries_) {
      if (e.state > s) break;
      c += e.prob;
    }
    return c;
  }

  State min_state() const { return entries_.front().state; }
  State max_state() const { return entries_.back().state; }

 private:
  std::vector<Entry> entries_;
};

struct ConfigViolation {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ConfigViolation> violations;
  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (const auto& v : violations) os << v.field << ": " << v.message << '\n';
    return os.str();
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline bool in_open_unit(double v) { return v > 0.0 && v < 1.0; }

}  // namespace detail

inline ValidationReport validate_config(const SystemConfig& cfg) {
  using detail::fmt_num;
  ValidationReport rep;
  auto add = [&](std::string field, std::string msg) {
    rep.violations.push_back({std::move(field), std::move(msg)});
  };

  if (!detail::in_open_unit(cfg.arrival_p))
    add("arrival_p", "arrival_p outside (0,1): " + fmt_num(cfg.arrival_p));
  if (cfg.buffer < 1) add("buffer", "buffer must be >= 1, got " + std::to_string(cfg.buffer));
  if (cfg.servers.empty()) add("servers", "at least one server required");

  for (std::size_t i = 0; i < cfg.servers.size(); ++i) {
    const auto& s = cfg.servers[i];
    const std::string tag = "servers[" + std::to_string(i) + "]";
    if (!detail::in_open_unit(s.q)) add(tag + ".q", "q outside (0,1): " + fmt_num(s.q));
    if (!(s.cost_c > 0.0)) add(tag + ".cost_c", "cost_c must be > 0, got " + fmt_num(s.cost_c));
  }

  if (cfg.strict_stability_mode && !cfg.servers.empty()) {
    for (std::size_t i = 1; i < cfg.servers.size(); ++i) {
      if (!(cfg.servers[i].q < cfg.servers[i - 1].q))
        add("servers[" + std::to_string(i) + "].q",
            "q not strictly decreasing: " + fmt_num(cfg.servers[i].q) +
                " >= " + fmt_num(cfg.servers[i - 1].q));
    }
    const double qmin = cfg.q_min();
    if (!(qmin > 2.0 * cfg.arrival_p))
      add("servers.q", "q_min=" + fmt_num(qmin) + " <= 2p=" + fmt_num(2.0 * cfg.arrival_p));
  }
  return rep;
}

/// Binomial(x, q/x) departures; a point mass at zero for an empty queue.
inline Pmf departure_pmf(State x, double q) {
  if (x < 0) throw std::invalid_argument("departure_pmf: negative queue length");
  if (!detail::in_open_unit(q)) throw std::invalid_argument("departure_pmf: q outside (0,1)");
  if (x == 0) return Pmf({{0, 1.0}});

  const double r = q / x;
  const double ratio = r / (1.0 - r);
  std::vector<Pmf::Entry> out(static_cast<std::size_t>(x) + 1);
  double mass = std::pow(1.0 - r, x);
  for (State d = 0; d <= x; ++d) {
    out[d] = {d, mass};
    mass *= ratio * static_cast<double>(x - d) / static_cast<double>(d + 1);
  }
  return Pmf(std::move(out));
}

/// Law of min(x - D + active*xi, buffer) with D ~ departure_pmf(x, q), xi ~ Bernoulli(p).
inline Pmf next_state_pmf(State x, double q, double p, bool active, State buffer) {
  if (x < 0 || x > buffer)
    throw std::invalid_argument("next_state_pmf: state outside [0, buffer]");
  const Pmf dep = departure_pmf(x, q);
  std::vector<double> mass(static_cast<std::size_t>(x) + 2, 0.0);
  for (const auto& [d, pd] : dep) {
    const State stay = x - d;
    if (active) {
      mass[std::min(stay + 1, buffer)] += pd * p;
      mass[stay] += pd * (1.0 - p);
    } else {
      mass[stay] += pd;
    }
  }
  std::vector<Pmf::Entry> out;
  out.reserve(mass.size());
  for (std::size_t s = 0; s < mass.size(); ++s)
    if (mass[s] > 0.0) out.push_back({static_cast<State>(s), mass[s]});
  return Pmf(std::move(out));
}

/// c(x, nu) = C x + (1 - nu) lambda
inline double stage_cost(State x, bool active, double lambda, double cost_c) {
  return cost_c * x + (active ? 0.0 : lambda);
}

struct LyapunovCertificate {
  double a;  ///< exponent of Phi(x) = sum_i exp(a x_i)
  double b;  ///< geometric drift margin
};

/// (q_min/2)(1 - e^{-a}) - p(e^a - 1); positive exactly when `a` certifies drift.
inline double lyapunov_margin(double a, double p, double q_min) {
  return 0.5 * q_min * (-std::expm1(-a)) - p * std::expm1(a);
}

/// Bisects the margin's derivative on (0, 5] and returns the maximizing exponent.
/// No certificate exists when q_min <= 2p.
inline std::optional<LyapunovCertificate> lyapunov_certificate(double p, double q_min) {
  if (!detail::in_open_unit(p) || !detail::in_open_unit(q_min))
    throw std::invalid_argument("lyapunov_certificate: p and q_min must lie in (0,1)");
  if (!(q_min > 2.0 * p)) return std::nullopt;

  // d/da margin = (q_min/2) e^{-a} - p e^{a}, strictly decreasing in a.
  auto slope = [&](double a) { return 0.5 * q_min * std::exp(-a) - p * std::exp(a); };
  double lo = 0.0, hi = 5.0;
  if (slope(hi) > 0.0) {
    lo = hi;
  } else {
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
  }
  const double a = 0.5 * (lo + hi);
  const double b = lyapunov_margin(a, p, q_min);
  if (!(a > 0.0 && b > 0.0)) return std::nullopt;
  return LyapunovCertificate{a, b};
}

/// Departure laws for one server, tabulated densely for x = 0..max_state.
/// Row x holds P(D = d | x) for d = 0..x.
class DepartureTable {
 public:
  DepartureTable() = default;
  DepartureTable(double q, State max_state) : q_(q) {
    rows_.reserve(static_cast<std::size_t>(max_state) + 1);
    for (State x = 0; x <= max_state; ++x) {
      const Pmf pmf = departure_pmf(x, q);
      std::vector<double> row(static_cast<std::size_t>(x) + 1, 0.0);
      for (const auto& [d, pd] : pmf) row[d] = pd;
      rows_.push_back(std::move(row));
    }
  }

  double q() const { return q_; }
  State max_state() const { return static_cast<State>(rows_.size()) - 1; }
  const std::vector<double>& operator[](State x) const { return rows_[x]; }

 private:
  double q_ = 0.0;
  std::vector<std::vector<double>> rows_;
};

/// Dense single-queue transition rows on {0..buffer} for both actions.
class SingleQueueKernel {
 public:
  SingleQueueKernel(double q, double p, State buffer)
      : p_(p), buffer_(buffer), deps_(q, buffer) {}

  double p() const { return p_; }
  double q() const { return deps_.q(); }
  State buffer() const { return buffer_; }
  const DepartureTable& departures() const { return deps_; }

  /// E[f(next) | x, action] for f given on {0..buffer}.
  template <class Values>
  double expect(State x, bool active, const Values& f) const {
    const auto& row = deps_[x];
    double acc = 0.0;
    if (active) {
      for (State d = 0; d <= x; ++d) {
        const State stay = x - d;
        const State up = std::min(stay + 1, buffer_);
        acc += row[d] * (p_ * f[up] + (1.0 - p_) * f[stay]);
      }
    } else {
      for (State d = 0; d <= x; ++d) acc += row[d] * f[x - d];
    }
    return acc;
  }

  /// Adds weight * P(. | x, action) into `out` (indexed by next state).
  template <class Out>
  void scatter(State x, bool active, double weight, Out& out) const {
    const auto& row = deps_[x];
    for (State d = 0; d <= x; ++d) {
      const State stay = x - d;
      if (active) {
        out[std::min(stay + 1, buffer_)] += weight * row[d] * p_;
        out[stay] += weight * row[d] * (1.0 - p_);
      } else {
        out[stay] += weight * row[d];
      }
    }
  }

 private:
  double p_;
  State buffer_;
  DepartureTable deps_;
};

}  // namespace psw
