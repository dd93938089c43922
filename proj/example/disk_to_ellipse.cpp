// Transports the uniform density on the unit disk onto the ellipse
// x^2/4 + y^2/9 <= 1 and compares the potential with x^2 + 3y^2/2.

#include <cstdio>

#include "maot.hpp"

int main() {
  using namespace maot;
  auto [data, exact] = disk_ellipse_benchmark();
  for (std::size_t level : {1, 2}) {
    FESpace space(triangulate_disk(level), 1);
    RecoveryOperators ops(space);
    SolveResult r = solve_maot(ops, data);
    ErrorNorms e = error_norms(space, r.state, exact);
    std::printf("level %zu: %s in %d iterations, |u - U| = %.3e, |grad u - G U| = %.3e\n", level,
                to_string(r.status), r.state.iter, e.l2, e.recgrad);
    for (std::size_t i = 0; i < r.history.size(); ++i)
      std::printf("  %zu  %.3e\n", i, r.history[i]);
  }
}
