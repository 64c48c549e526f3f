// Solves a two-server system exactly and measures how far the index policy
// and the c-mu rule land from the optimum.

#include <cstdio>

#include "psw/dp.hpp"
#include "psw/sim.hpp"
#include "psw/whittle.hpp"

int main() {
  const psw::SystemConfig cfg{0.4, {{0.55, 100}, {0.50, 90}}, 25, false};
  const auto sol = std::make_shared<const psw::JointSolution>(psw::joint_rvi(cfg));
  const psw::IndexTable t = psw::build_index_table(cfg, 25, {}, 100);

  const auto table = psw::compare(
      cfg, {psw::WhittlePolicy{t}, psw::CmuPolicy{cfg}, psw::ExactPolicy{sol}}, 200'000, 10'000,
      {1, 2, 3, 4, 5});
  std::printf("optimal average cost %.4f\n", sol->beta);
  for (const auto& s : table.summaries)
    std::printf("%-8s %.4f +/- %.4f  (%+.2f%%)\n", s.policy.c_str(), s.mean, s.half_width,
                100.0 * (s.mean - sol->beta) / sol->beta);
}
