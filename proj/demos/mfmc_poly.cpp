// MFMC with two cheap polynomial surrogates, against plain MC on the same budget.

#include <cmath>
#include <cstdio>

#include "uqmc/uqmc.hpp"

int main() {
  const auto problem = uqmc::builtin_problem("poly_fidelity");
  const double budget = 1e4;
  const auto res = uqmc::mfmc_estimate(*problem.ensemble, budget, uqmc::RngStream{7});

  std::printf("sigma_hi %.4f\n", res.pilot.sigma_hi);
  for (std::size_t i = 0; i < res.pilot.k(); ++i) {
    std::printf("  %-9s rho %.6f  beta %.4f  n %zu\n", problem.ensemble->lows[res.pilot.index[i]].id().c_str(),
                res.pilot.rho[i], res.plan.beta[i], res.plan.n[i + 1]);
  }
  std::printf("high-fidelity samples %zu, predicted variance ratio chi %.4f\n", res.plan.n[0], res.plan.chi);
  std::printf("estimate %.5f +- %.5f (exact %.5f)\n", res.report.estimate, std::sqrt(res.report.estimator_variance),
              *problem.truth_mean);
  return 0;
}
