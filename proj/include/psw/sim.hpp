#pragma once

// Discrete-time simulation of the I-queue system under a scheduling rule.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "psw/model.hpp"
#include "psw/policies.hpp"

namespace psw {

/// Inverse-CDF sampling of processor-sharing departures for x = 0..max_state.
class DepartureSampler {
 public:
  DepartureSampler(double q, State max_state) {
    const DepartureTable table(q, max_state);
    cdf_.resize(static_cast<std::size_t>(max_state) + 1);
    for (State x = 0; x <= max_state; ++x) {
      double acc = 0.0;
      for (double pd : table[x]) cdf_[x].push_back(acc += pd);
      cdf_[x].back() = 1.0;
    }
  }

  /// Departures from a queue holding x jobs, given u uniform on [0,1).
  State operator()(State x, double u) const {
    const auto& c = cdf_[x];
    return static_cast<State>(std::upper_bound(c.begin(), c.end(), u) - c.begin());
  }

 private:
  std::vector<std::vector<double>> cdf_;
};

/// Independent generator derived from a master seed; the tag names the stream.
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t arrivals = 1;
inline constexpr std::uint64_t policy = 2;
inline constexpr std::uint64_t departures_base = 1000;  // + server index
}  // namespace stream

struct SimOptions {
  long horizon = 1'000'000;
  long burn_in = 10'000;
  std::uint64_t seed = 1;
  long trace_every = 0;             ///< record the running average every n post-burn-in slots
  bool check_conservation = false;  ///< verify the per-slot balance of every queue
};

struct SimReport {
  std::string policy;
  long horizon = 0;
  long burn_in = 0;
  std::uint64_t seed = 0;
  double avg_cost = 0.0;
  std::vector<double> mean_length;  ///< per server, post burn-in
  long drops = 0;
  std::vector<std::pair<long, double>> trace;  ///< (slot, running average cost)
  long conservation_checks = 0;
};

class ConservationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline SimReport simulate(const SystemConfig& cfg, const PolicyKind& policy,
                          const SimOptions& opt) {
  if (!(opt.horizon > opt.burn_in && opt.burn_in >= 0))
    throw std::invalid_argument("simulate: need horizon > burn_in >= 0");
  const std::size_t I = cfg.size();
  if (I == 0) throw std::invalid_argument("simulate: no servers");

  std::vector<DepartureSampler> samplers;
  std::vector<Rng> dep_rng;
  for (std::size_t i = 0; i < I; ++i) {
    samplers.emplace_back(cfg.servers[i].q, cfg.buffer);
    dep_rng.push_back(make_stream(opt.seed, stream::departures_base + i));
  }
  Rng arr_rng = make_stream(opt.seed, stream::arrivals);
  Rng pol_rng = make_stream(opt.seed, stream::policy);

  SimReport rep;
  rep.policy = policy_name(policy);
  rep.horizon = opt.horizon;
  rep.burn_in = opt.burn_in;
  rep.seed = opt.seed;
  rep.mean_length.assign(I, 0.0);

  std::vector<State> x(I, 0), dep(I);
  std::vector<double> len_sum(I, 0.0);
  double cost_sum = 0.0;
  long recorded = 0;

  for (long t = 0; t < opt.horizon; ++t) {
    if (t >= opt.burn_in) {
      double c = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        c += cfg.servers[i].cost_c * x[i];
        len_sum[i] += x[i];
      }
      cost_sum += c;
      ++recorded;
      if (opt.trace_every > 0 && recorded % opt.trace_every == 0)
        rep.trace.emplace_back(t + 1, cost_sum / static_cast<double>(recorded));
    }

    const std::size_t active = select_server(policy, x, pol_rng);
    if (active >= I) throw std::logic_error("simulate: policy chose a nonexistent server");

    for (std::size_t i = 0; i < I; ++i) dep[i] = samplers[i](x[i], uniform01(dep_rng[i]));
    const bool arrival = uniform01(arr_rng) < cfg.arrival_p;

    for (std::size_t i = 0; i < I; ++i) {
      const State before = x[i];
      State next = before - dep[i];
      int admitted = 0;
      if (arrival && i == active) {
        if (next < cfg.buffer) {
          ++next;
          admitted = 1;
        } else {
          ++rep.drops;
        }
      }
      if (opt.check_conservation) {
        if (next - before + dep[i] - admitted != 0 || next < 0 || next > cfg.buffer)
          throw ConservationError("simulate: queue balance violated at slot " + std::to_string(t));
        ++rep.conservation_checks;
      }
      x[i] = next;
    }
  }

  rep.avg_cost = cost_sum / static_cast<double>(recorded);
  for (std::size_t i = 0; i < I; ++i) rep.mean_length[i] = len_sum[i] / static_cast<double>(recorded);
  return rep;
}

struct PolicySummary {
  std::string policy;
  std::size_t runs = 0;
  double mean = 0.0;
  double half_width = 0.0;  ///< 95% normal-approximation half-width of the mean
};

struct ComparisonTable {
  std::vector<SimReport> reports;
  std::vector<PolicySummary> summaries;

  const PolicySummary& summary(const std::string& policy) const {
    for (const auto& s : summaries)
      if (s.policy == policy) return s;
    throw std::out_of_range("ComparisonTable: no policy named " + policy);
  }
};

inline PolicySummary summarize(const std::string& name, const std::vector<double>& costs) {
  PolicySummary s{name, costs.size(), 0.0, 0.0};
  if (costs.empty()) return s;
  for (double c : costs) s.mean += c;
  s.mean /= static_cast<double>(costs.size());
  if (costs.size() > 1) {
    double ss = 0.0;
    for (double c : costs) ss += (c - s.mean) * (c - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(costs.size() - 1));
    s.half_width = 1.96 * sd / std::sqrt(static_cast<double>(costs.size()));
  }
  return s;
}

/// Runs every (policy, seed) pair; runs are independent and may execute concurrently.
inline ComparisonTable compare(const SystemConfig& cfg, const std::vector<PolicyKind>& policies,
                               long horizon, long burn_in, const std::vector<std::uint64_t>& seeds,
                               unsigned workers = std::thread::hardware_concurrency()) {
  if (policies.empty()) throw std::invalid_argument("compare: at least one policy required");
  if (seeds.size() < 2) throw std::invalid_argument("compare: at least two seeds required");

  const std::size_t jobs = policies.size() * seeds.size();
  std::vector<SimReport> reports(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      try {
        SimOptions o;
        o.horizon = horizon;
        o.burn_in = burn_in;
        o.seed = seeds[j % seeds.size()];
        reports[j] = simulate(cfg, policies[j / seeds.size()], o);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(jobs));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ComparisonTable table;
  table.reports = std::move(reports);
  for (std::size_t p = 0; p < policies.size(); ++p) {
    std::vector<double> costs;
    for (std::size_t s = 0; s < seeds.size(); ++s)
      costs.push_back(table.reports[p * seeds.size() + s].avg_cost);
    table.summaries.push_back(summarize(policy_name(policies[p]), costs));
  }
  return table;
}

// Tabular output, 12 significant digits.

inline void write_report_header(std::ostream& os, std::size_t servers) {
  os << "policy,seed,horizon,burn_in,avg_cost";
  for (std::size_t i = 1; i <= servers; ++i) os << ",mean_len_" << i;
  os << ",drops\n";
}

inline void write_report_row(std::ostream& os, const SimReport& r) {
  const auto old = os.precision(12);
  os << r.policy << ',' << r.seed << ',' << r.horizon << ',' << r.burn_in << ',' << r.avg_cost;
  for (double m : r.mean_length) os << ',' << m;
  os << ',' << r.drops << '\n';
  os.precision(old);
}

inline void write_reports(std::ostream& os, const std::vector<SimReport>& reports) {
  write_report_header(os, reports.empty() ? 0 : reports.front().mean_length.size());
  for (const auto& r : reports) write_report_row(os, r);
}

inline void write_summaries(std::ostream& os, const std::vector<PolicySummary>& summaries) {
  const auto old = os.precision(12);
  os << "policy,runs,mean_avg_cost,half_width_95\n";
  for (const auto& s : summaries)
    os << s.policy << ',' << s.runs << ',' << s.mean << ',' << s.half_width << '\n';
  os.precision(old);
}

inline void write_trace(std::ostream& os, const SimReport& r) {
  const auto old = os.precision(12);
  os << "slot,running_avg_cost\n";
  for (const auto& [t, c] : r.trace) os << t << ',' << c << '\n';
  os.precision(old);
}

}  // namespace psw
