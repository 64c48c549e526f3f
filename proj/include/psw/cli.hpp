#pragma once

// Command runner behind the `psw` executable. Each subcommand loads and
// validates a config, runs one workflow and writes its tables under the
// output directory.
//
// Exit status: 0 success, 1 failed operation (invalid config, solver failure,
// unwritable output, failed property), 2 usage error.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "psw/dp.hpp"
#include "psw/io.hpp"
#include "psw/model.hpp"
#include "psw/policies.hpp"
#include "psw/sim.hpp"
#include "psw/structure.hpp"
#include "psw/whittle.hpp"

namespace psw::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"validate", "indices",  "simulate",
                                              "compare",  "exact",    "properties"};
  return names;
}

struct Overrides {
  std::optional<long> horizon;
  std::optional<long> burn_in;
  std::optional<long> seeds;
  std::optional<double> gamma;
  std::optional<double> tol;
  std::optional<State> truncation_n;
  std::optional<State> x_max;
  std::optional<std::string> policy;  ///< simulate: whittle, cmu, random or exact
  std::optional<std::uint64_t> seed;  ///< simulate: master seed
  std::optional<long> trace_every;    ///< simulate: running-average trace period
};

struct RunManifest {
  std::string config_path;
  std::string subcommand;
  std::string out_dir = ".";
  Overrides overrides;
};

/// Joint spaces up to this many states are solved exactly by `compare` and `exact`.
inline constexpr std::size_t exact_state_limit = 200'000;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline io::RunConfig apply_overrides(io::RunConfig rc, const Overrides& o) {
  if (o.horizon) rc.sim.horizon = *o.horizon;
  if (o.burn_in) rc.sim.burn_in = *o.burn_in;
  if (o.seeds) rc.sim.seeds = *o.seeds;
  if (o.gamma) rc.whittle.iteration.gamma = *o.gamma;
  if (o.tol) rc.whittle.iteration.tol = *o.tol;
  if (o.truncation_n) rc.whittle.truncation_n = *o.truncation_n;
  if (o.x_max) rc.whittle.x_max = *o.x_max;
  return rc;
}

inline void check_settings(const io::RunConfig& rc) {
  if (!(rc.sim.horizon > rc.sim.burn_in && rc.sim.burn_in >= 0))
    throw UsageError("need horizon > burn_in >= 0");
  if (rc.whittle.x_max < 1) throw UsageError("x_max must be >= 1");
  const State n = rc.whittle.truncation(rc.system.buffer);
  if (n < rc.whittle.x_max + 1) throw UsageError("truncation_n must be >= x_max + 1");
  try {
    rc.whittle.iteration.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::size_t joint_size(const SystemConfig& cfg) {
  double s = 1.0;
  for (std::size_t i = 0; i < cfg.size(); ++i) s *= static_cast<double>(cfg.buffer) + 1.0;
  return s > static_cast<double>(exact_state_limit) ? exact_state_limit + 1
                                                    : static_cast<std::size_t>(s);
}

inline bool exact_feasible(const SystemConfig& cfg) {
  return joint_size(cfg) <= exact_state_limit && cfg.size() <= 255;
}

inline std::vector<std::uint64_t> seed_list(long n) {
  std::vector<std::uint64_t> seeds;
  for (long s = 1; s <= n; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  return seeds;
}

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  }

  std::ofstream open(const std::string& name) {
    const auto path = dir_ / name;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    written_.push_back(path.string());
    return os;
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> written_;
};

inline std::shared_ptr<const JointSolution> solve_exact(const SystemConfig& cfg) {
  return std::make_shared<const JointSolution>(joint_rvi(cfg));
}

inline PolicyKind make_policy(const std::string& name, const io::RunConfig& rc) {
  const auto& cfg = rc.system;
  if (name == "whittle") {
    return WhittlePolicy{build_index_table(cfg, rc.whittle.x_max, rc.whittle.iteration,
                                           rc.whittle.truncation(cfg.buffer))};
  }
  if (name == "cmu") return CmuPolicy{cfg};
  if (name == "random") return RandomPolicy{cfg.size()};
  if (name == "exact") {
    if (!exact_feasible(cfg)) throw std::runtime_error("joint state space too large for exact");
    return ExactPolicy{solve_exact(cfg)};
  }
  throw UsageError("unknown policy '" + name + "' (whittle, cmu, random, exact)");
}

inline int cmd_validate(const io::RunConfig& rc, std::ostream& log) {
  log << "config valid: " << rc.system.size() << " servers, arrival_p=" << rc.system.arrival_p
      << ", buffer=" << rc.system.buffer << '\n';
  if (const auto cert = lyapunov_certificate(rc.system.arrival_p, rc.system.q_min()))
    log << "drift certificate: a=" << cert->a << ", b=" << cert->b << '\n';
  else
    log << "no drift certificate: q_min <= 2 arrival_p\n";
  return exit_ok;
}

inline int cmd_indices(const io::RunConfig& rc, Output& out, std::ostream& log) {
  const State N = rc.whittle.truncation(rc.system.buffer);
  const IndexTable t = build_index_table(rc.system, rc.whittle.x_max, rc.whittle.iteration, N);
  auto os = out.open("indices.csv");
  io::write_index_table(os, t);
  log << "indices: " << t.servers() << " servers, x = 0.." << t.x_max() << ", N=" << N << '\n';
  return exit_ok;
}

inline int cmd_simulate(const io::RunConfig& rc, const Overrides& o, Output& out,
                        std::ostream& log) {
  const PolicyKind pk = make_policy(o.policy.value_or("whittle"), rc);
  SimOptions opt;
  opt.horizon = rc.sim.horizon;
  opt.burn_in = rc.sim.burn_in;
  opt.seed = o.seed.value_or(1);
  opt.trace_every = o.trace_every.value_or(0);
  if (opt.trace_every < 0) throw UsageError("trace_every must be >= 0");
  const SimReport r = simulate(rc.system, pk, opt);
  {
    auto os = out.open("report.csv");
    write_reports(os, {r});
  }
  if (!r.trace.empty()) {
    auto os = out.open("trace.csv");
    write_trace(os, r);
  }
  log << r.policy << ": avg_cost=" << r.avg_cost << " (seed " << r.seed << ")\n";
  return exit_ok;
}

inline int cmd_compare(const io::RunConfig& rc, Output& out, std::ostream& log) {
  if (rc.sim.seeds < 2) throw UsageError("compare needs at least 2 seeds");
  std::vector<PolicyKind> pols{make_policy("whittle", rc), make_policy("cmu", rc),
                               make_policy("random", rc)};
  std::optional<double> beta_opt;
  if (exact_feasible(rc.system)) {
    const auto sol = solve_exact(rc.system);
    beta_opt = sol->beta;
    pols.push_back(ExactPolicy{sol});
  } else {
    log << "exact policy skipped: joint state space too large\n";
  }
  const auto table =
      compare(rc.system, pols, rc.sim.horizon, rc.sim.burn_in, seed_list(rc.sim.seeds));
  {
    auto os = out.open("reports.csv");
    write_reports(os, table.reports);
  }
  {
    auto os = out.open("comparison.csv");
    write_summaries(os, table.summaries);
  }
  for (const auto& s : table.summaries)
    log << s.policy << ": " << s.mean << " +/- " << s.half_width << '\n';
  if (beta_opt) log << "optimal average cost: " << *beta_opt << '\n';
  return exit_ok;
}

inline int cmd_exact(const io::RunConfig& rc, Output& out, std::ostream& log) {
  if (!exact_feasible(rc.system))
    throw std::runtime_error("joint state space exceeds " + std::to_string(exact_state_limit) +
                             " states");
  const auto sol = solve_exact(rc.system);
  {
    auto os = out.open("exact_beta.csv");
    os.precision(12);
    os << "beta,sweeps,states\n" << sol->beta << ',' << sol->sweeps << ',' << sol->space.size() << '\n';
  }
  {
    auto os = out.open("exact_policy.csv");
    io::write_joint_policy(os, *sol);
  }
  log << "optimal average cost: " << sol->beta << " after " << sol->sweeps << " sweeps\n";
  return exit_ok;
}

inline int cmd_properties(const io::RunConfig& rc, Output& out, std::ostream& log) {
  const double p = rc.system.arrival_p;
  const State N = 80;
  const auto lambdas = check::grid(-20.0, 20.0, 0.5);
  struct Row {
    std::size_t server;
    check::CheckResult result;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < rc.system.size(); ++i) {
    const auto& s = rc.system.servers[i];
    const auto sweep = check::sweep_lambda(s, p, N, lambdas);
    rows.push_back({i, check::threshold_structure(sweep)});
    rows.push_back({i, check::indexability(sweep)});
    rows.push_back({i, check::value_structure(sweep)});
    rows.push_back({i, check::f_inequality(sweep)});
    rows.push_back({i, check::stationary_mass(s.q, p, 40)});
    rows.push_back({i, check::dominance(s.q, p, 40)});
    rows.push_back({i, check::beta_shape(s, p, 60, check::grid(-20.0, 20.0, 0.25))});
    rows.push_back({i, check::departure_mean(s.q, 200)});
  }
  bool ok = true;
  auto os = out.open("properties.csv");
  os << "check,server,checked,violations,status,first_failure\n";
  for (const auto& [i, r] : rows) {
    ok = ok && r.pass();
    os << '"' << r.name << "\"," << i + 1 << ',' << r.checked << ',' << r.violations << ','
       << (r.pass() ? "pass" : "fail") << ",\"" << r.first_failure << "\"\n";
    log << (r.pass() ? "pass" : "FAIL") << "  server " << i + 1 << "  " << r.name;
    if (!r.pass()) log << ": " << r.first_failure;
    log << '\n';
  }
  return ok ? exit_ok : exit_failure;
}

}  // namespace detail

/// Runs one subcommand; progress goes to `log`, diagnostics to `err`.
inline int run_command(const RunManifest& m, std::ostream& log, std::ostream& err) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), m.subcommand) == names.end()) {
    err << "usage error: unknown subcommand '" << m.subcommand << "'\n";
    return exit_usage;
  }
  if (m.overrides.seeds && *m.overrides.seeds < 1) {
    err << "usage error: --seeds must be >= 1\n";
    return exit_usage;
  }
  try {
    const io::RunConfig rc =
        detail::apply_overrides(io::load_config(m.config_path), m.overrides);
    const auto report = validate_config(rc.system);
    if (!report.ok()) {
      err << "invalid config " << m.config_path << ":\n" << report.to_string();
      return exit_failure;
    }
    detail::check_settings(rc);
    if (m.subcommand == "validate") return detail::cmd_validate(rc, log);

    detail::Output out(m.out_dir);
    if (m.subcommand == "indices") return detail::cmd_indices(rc, out, log);
    if (m.subcommand == "simulate") return detail::cmd_simulate(rc, m.overrides, out, log);
    if (m.subcommand == "compare") return detail::cmd_compare(rc, out, log);
    if (m.subcommand == "exact") return detail::cmd_exact(rc, out, log);
    return detail::cmd_properties(rc, out, log);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

}  // namespace psw::cli
