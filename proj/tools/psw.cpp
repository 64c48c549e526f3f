// psw: indices, simulations and exact solutions for processor-sharing
// queues scheduled by a single active server.

#include <iostream>

#include <CLI11.hpp>

#include "psw/cli.hpp"

int main(int argc, char** argv) {
  using namespace psw::cli;

  CLI::App app{"Whittle-index scheduling of processor-sharing queues"};
  app.require_subcommand(1);
  app.fallthrough();

  RunManifest m;
  auto& o = m.overrides;
  app.add_option("--config", m.config_path, "JSON configuration file")->required();
  app.add_option("--out", m.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seeds", o.seeds, "Number of seeds (compare)");
  app.add_option("--horizon", o.horizon, "Simulated slots per run");
  app.add_option("--burn-in", o.burn_in, "Slots discarded before averaging");
  app.add_option("--x-max", o.x_max, "Largest state with a computed index");
  app.add_option("--gamma", o.gamma, "Index iteration step size");
  app.add_option("--tol", o.tol, "Index iteration tolerance");
  app.add_option("--truncation-n", o.truncation_n, "Single-queue truncation level N");

  app.add_subcommand("validate", "Check a configuration");
  app.add_subcommand("indices", "Write the Whittle index table");
  auto* sim = app.add_subcommand("simulate", "Simulate one policy");
  sim->add_option("--policy", o.policy, "whittle, cmu, random or exact");
  sim->add_option("--seed", o.seed, "Master seed");
  sim->add_option("--trace-every", o.trace_every, "Trace period in slots");
  app.add_subcommand("compare", "Compare all policies across seeds");
  app.add_subcommand("exact", "Solve the joint problem by relative value iteration");
  app.add_subcommand("properties", "Run the structural checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }
  m.subcommand = app.get_subcommands().front()->get_name();
  return run_command(m, std::cout, std::cerr);
}
