// Prints the Whittle indices of a three-server system for x = 0..10.

#include <cstdio>

#include "psw/whittle.hpp"

int main() {
  const psw::SystemConfig cfg{0.4, {{0.55, 30}, {0.50, 29}, {0.45, 28}}, 100, false};
  const psw::IndexTable t = psw::build_index_table(cfg, 10);
  std::printf(" x %12s %12s %12s\n", "server 1", "server 2", "server 3");
  for (psw::State x = 0; x <= t.x_max(); ++x)
    std::printf("%2d %12.4f %12.4f %12.4f\n", x, t(0, x), t(1, x), t(2, x));
}
