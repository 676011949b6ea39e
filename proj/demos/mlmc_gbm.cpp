// Adaptive MLMC on the Euler-discretised geometric Brownian motion,
// compared with the cost of plain MC on the finest level it needed.

#include <cstdio>

#include "uqmc/uqmc.hpp"

int main() {
  const auto problem = uqmc::builtin_problem("gbm_euler");
  const double eps = 0.01;
  const auto res = uqmc::mlmc_estimate(*problem.hierarchy, eps, uqmc::RngStream{42});

  std::printf("%5s %14s %12s %8s %9s\n", "level", "mean", "variance", "cost", "n");
  for (const auto& s : res.levels) {
    std::printf("%5zu %14.6e %12.4e %8.0f %9zu\n", s.level, s.mean, s.variance, s.cost, s.n);
  }
  const std::size_t L = res.levels.size() - 1;
  const double plain = *problem.truth_variance / (eps * eps) * problem.hierarchy->model(L).cost_per_eval();
  std::printf("\nestimate %.6f  (exact %.6f)\n", res.report.estimate, *problem.truth_mean);
  std::printf("MLMC cost %.0f vs plain MC %.0f  (ratio %.3f)\n", res.report.total_cost(), plain,
              res.report.total_cost() / plain);
  return 0;
}
