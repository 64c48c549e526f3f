#pragma once

// Configuration files and tabular artifacts.
//
// Config (JSON):
//   {
//     "arrival_p": 0.4, "buffer": 100, "strict_stability_mode": false,
//     "servers": [ {"q": 0.55, "cost_c": 30}, ... ],
//     "whittle": {"gamma": 0.1, "tol": 1e-6, "max_iter": 100000, "x_max": 40, "truncation_n": 100},
//     "sim": {"horizon": 1000000, "burn_in": 10000, "seeds": 10}
//   }

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "psw/dp.hpp"
#include "psw/model.hpp"
#include "psw/whittle.hpp"

namespace psw::io {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WhittleSettings {
  IndexIterationConfig iteration;
  State x_max = 40;
  std::optional<State> truncation_n;

  State truncation(State buffer) const {
    return truncation_n.value_or(default_truncation(x_max, buffer));
  }
};

struct SimSettings {
  long horizon = 1'000'000;
  long burn_in = 10'000;
  long seeds = 10;
};

struct RunConfig {
  SystemConfig system;
  WhittleSettings whittle;
  SimSettings sim;
};

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig rc;
  try {
    rc.system.arrival_p = j.at("arrival_p").get<double>();
    rc.system.buffer = j.at("buffer").get<State>();
    rc.system.strict_stability_mode = j.value("strict_stability_mode", false);
    for (const auto& s : j.at("servers"))
      rc.system.servers.push_back({s.at("q").get<double>(), s.at("cost_c").get<double>()});

    if (auto w = j.find("whittle"); w != j.end()) {
      auto& it = rc.whittle.iteration;
      it.gamma = w->value("gamma", it.gamma);
      it.tol = w->value("tol", it.tol);
      it.max_iter = w->value("max_iter", it.max_iter);
      it.lambda0 = w->value("lambda0", it.lambda0);
      rc.whittle.x_max = w->value("x_max", rc.whittle.x_max);
      if (auto n = w->find("truncation_n"); n != w->end() && !n->is_null())
        rc.whittle.truncation_n = n->get<State>();
    }
    if (auto s = j.find("sim"); s != j.end()) {
      rc.sim.horizon = s->value("horizon", rc.sim.horizon);
      rc.sim.burn_in = s->value("burn_in", rc.sim.burn_in);
      rc.sim.seeds = s->value("seeds", rc.sim.seeds);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return parse_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
}

/// Shortest decimal form that reads back to the same double.
inline std::string exact_decimal(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("exact_decimal: conversion failed");
  return std::string(buf.data(), res.ptr);
}

/// Rows "server,x,index" with 1-based servers; index values round-trip exactly.
inline void write_index_table(std::ostream& os, const IndexTable& t) {
  os << "server,x,index\n";
  for (std::size_t i = 0; i < t.servers(); ++i)
    for (State x = 0; x <= t.x_max(); ++x)
      os << i + 1 << ',' << x << ',' << exact_decimal(t.server(i)[x]) << '\n';
}

inline IndexTable read_index_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "server,x,index")
    throw std::runtime_error("index table: missing header");
  std::vector<std::vector<double>> cols;
  State x_max = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
      throw std::runtime_error("index table: malformed row '" + line + "'");
    const std::size_t server = std::stoul(a);
    const State x = std::stoi(b);
    double v = 0.0;
    if (std::from_chars(c.data(), c.data() + c.size(), v).ec != std::errc{})
      throw std::runtime_error("index table: bad index '" + c + "'");
    if (server < 1) throw std::runtime_error("index table: servers are numbered from 1");
    if (cols.size() < server) cols.resize(server);
    auto& col = cols[server - 1];
    if (x != static_cast<State>(col.size()))
      throw std::runtime_error("index table: rows out of order at '" + line + "'");
    col.push_back(v);
    x_max = std::max(x_max, x);
  }
  if (cols.empty()) throw std::runtime_error("index table: no rows");
  return IndexTable(x_max, std::move(cols));
}

/// Rows "x_1,...,x_I,server" with a 1-based server.
inline void write_joint_policy(std::ostream& os, const JointSolution& sol) {
  const auto& sp = sol.space;
  for (std::size_t i = 1; i <= sp.servers(); ++i) os << 'x' << i << ',';
  os << "server\n";
  for (std::size_t idx = 0; idx < sp.size(); ++idx) {
    for (State v : sp.decode(idx)) os << v << ',';
    os << static_cast<int>(sol.policy[idx]) + 1 << '\n';
  }
}

}  // namespace psw::io
