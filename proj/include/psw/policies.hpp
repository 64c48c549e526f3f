#pragma once

// Scheduling rules: map a joint queue state to the one server that admits
// this slot's arrival. Server indices are 0-based; ties go to the lowest index.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "psw/dp.hpp"
#include "psw/model.hpp"
#include "psw/whittle.hpp"

namespace psw {

using JointState = std::vector<State>;
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t whittle_select(std::span<const State> state, const IndexTable& tables) {
  if (tables.servers() != state.size())
    throw std::invalid_argument("whittle_select: one index table per server required");
  std::size_t best = 0;
  double best_index = tables(0, state[0]);
  for (std::size_t i = 1; i < state.size(); ++i) {
    const double v = tables(i, state[i]);
    if (v < best_index) {
      best_index = v;
      best = i;
    }
  }
  return best;
}

/// argmin C_i x_i / q_i
inline std::size_t cmu_select(std::span<const State> state, const SystemConfig& cfg) {
  std::size_t best = 0;
  double best_score = cfg.servers[0].cost_c * state[0] / cfg.servers[0].q;
  for (std::size_t i = 1; i < state.size(); ++i) {
    const double score = cfg.servers[i].cost_c * state[i] / cfg.servers[i].q;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

inline std::size_t random_select(Rng& rng, std::size_t servers) {
  if (servers == 0) throw std::invalid_argument("random_select: no servers");
  const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(servers));
  return pick < servers ? pick : servers - 1;
}

inline std::size_t exact_select(std::span<const State> state, const JointSolution& sol) {
  return sol.policy[sol.space.encode(state)];  // encode throws outside the table
}

struct WhittlePolicy {
  IndexTable tables;
};
struct CmuPolicy {
  SystemConfig cfg;
};
struct RandomPolicy {
  std::size_t servers = 1;
};
struct ExactPolicy {
  std::shared_ptr<const JointSolution> solution;
};

using PolicyKind = std::variant<WhittlePolicy, CmuPolicy, RandomPolicy, ExactPolicy>;

inline std::string policy_name(const PolicyKind& pk) {
  struct {
    std::string operator()(const WhittlePolicy&) const { return "whittle"; }
    std::string operator()(const CmuPolicy&) const { return "cmu"; }
    std::string operator()(const RandomPolicy&) const { return "random"; }
    std::string operator()(const ExactPolicy&) const { return "exact"; }
  } name;
  return std::visit(name, pk);
}

/// `rng` is the policy stream; only the random rule draws from it.
inline std::size_t select_server(const PolicyKind& pk, std::span<const State> state, Rng& rng) {
  struct Visitor {
    std::span<const State> state;
    Rng& rng;
    std::size_t operator()(const WhittlePolicy& w) const { return whittle_select(state, w.tables); }
    std::size_t operator()(const CmuPolicy& c) const { return cmu_select(state, c.cfg); }
    std::size_t operator()(const RandomPolicy& r) const { return random_select(rng, r.servers); }
    std::size_t operator()(const ExactPolicy& e) const {
      if (!e.solution) throw std::invalid_argument("exact policy without a solution");
      return exact_select(state, *e.solution);
    }
  };
  return std::visit(Visitor{state, rng}, pk);
}

}  // namespace psw
