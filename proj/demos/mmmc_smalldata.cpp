// Ten data points, four candidate families: how uncertain is E[exp(0.3 X)]?

#include <cstdio>

#include "uqmc/uqmc.hpp"

int main() {
  const auto problem = uqmc::builtin_problem("smalldata_demo");
  uqmc::MmmcOptions opts;
  opts.ensemble_size = 200;
  const auto res = uqmc::run_mmmc(*problem.model, *problem.dataset, opts, uqmc::RngStream{2024});

  for (std::size_t i = 0; i < res.probabilities.families.size(); ++i) {
    std::printf("%-10s  P = %.3f\n", uqmc::family_name(res.probabilities.families[i]).c_str(),
                res.probabilities.pi[i]);
  }
  const auto& q = res.report.quantiles;
  std::printf("\nE[Y] across %zu candidate input models (%llu model runs):\n", res.candidates.size(),
              static_cast<unsigned long long>(res.report.ledger.total_evaluations()));
  std::printf("  5%% %.3f  25%% %.3f  50%% %.3f  75%% %.3f  95%% %.3f\n", q[0], q[1], q[2], q[3], q[4]);
  return 0;
}
