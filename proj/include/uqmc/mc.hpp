#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "uqmc/errors.hpp"
#include "uqmc/models.hpp"
#include "uqmc/parallel.hpp"
#include "uqmc/report.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

/// Inputs and outputs of an estimator run, for per-sample dumps.
struct SampleTrace {
  InputBatch inputs{0, 1};
  std::vector<double> outputs;
  std::vector<double> weights;
};

/// Standard Monte Carlo: mean of n i.i.d. model outputs, sample i drawn from
/// rng.at(i). Variance estimate zeta^2 / n with the unbiased zeta^2; the
/// biased variant is kept as a diagnostic.
inline EstimateReport mc_estimate(const Model& model, const InputSampler& input, std::size_t n,
                                  const RngStream& rng, const Executor& exec = {},
                                  SampleTrace* trace = nullptr) {
  detail::require(n >= 2, "mc_estimate needs n >= 2");
  EstimateReport rep;
  rep.method = Method::mc;
  rep.seed = rng.seed;
  const InputBatch x = input.draw_batch(rng, n, exec);
  const auto y = evaluate(model, x, rep.ledger, exec);
  const double zeta2 = sample_variance(y);
  rep.set_estimate(mean(y), zeta2 / static_cast<double>(n));
  rep.diagnostics["zeta2"] = zeta2;
  rep.diagnostics["zeta2_biased"] = zeta2 * static_cast<double>(n - 1) / static_cast<double>(n);
  rep.diagnostics["n"] = static_cast<double>(n);
  if (trace) {
    trace->inputs = x;
    trace->outputs = y;
    trace->weights.assign(n, 1.0);
  }
  return rep;
}

inline EstimateReport mc_estimate(const Model& model, const Distribution& input, std::size_t n,
                                  const RngStream& rng, const Executor& exec = {}) {
  return mc_estimate(model, InputSampler::iid(input, model.input_dim()), n, rng, exec);
}

/// Control model G with known mean. lambda unset means "auto": estimated
/// from pilot_n dedicated pilot samples that are not reused.
struct ControlVariateConfig {
  Model control;
  double control_mean = 0.0;
  std::optional<double> lambda;
  std::size_t pilot_n = 100;
};

/// mean of M(x_i) - lambda (G(x_i) - E[G]) over n samples.
inline EstimateReport cv_estimate(const Model& model, const InputSampler& input, const ControlVariateConfig& cfg,
                                  std::size_t n, const RngStream& rng, const Executor& exec = {},
                                  SampleTrace* trace = nullptr) {
  detail::require(n >= 2, "cv_estimate needs n >= 2");
  detail::require(std::isfinite(cfg.control_mean), "control mean must be finite");
  EstimateReport rep;
  rep.method = Method::cv;
  rep.seed = rng.seed;

  double lambda = 0.0;
  if (cfg.lambda) {
    lambda = *cfg.lambda;
  } else {
    detail::require(cfg.pilot_n >= 2, "auto lambda needs pilot_n >= 2");
    const InputBatch xp = input.draw_batch(rng.substream(stream_tag::pilot), cfg.pilot_n, exec);
    const auto mp = evaluate(model, xp, rep.ledger, exec);
    const auto gp = evaluate(cfg.control, xp, rep.ledger, exec);
    const double vg = sample_variance(gp);
    if (!(vg > 0.0)) throw estimator_error("control variate is constant on the pilot sample; cannot estimate lambda");
    // rho * sqrt(V[M] / V[G]) == Cov(M, G) / V[G]
    lambda = sample_covariance(mp, gp) / vg;
    rep.diagnostics["pilot_n"] = static_cast<double>(cfg.pilot_n);
    rep.diagnostics["rho_hat_pilot"] = correlation(mp, gp);
  }

  const InputBatch x = input.draw_batch(rng, n, exec);
  const auto m = evaluate(model, x, rep.ledger, exec);
  const auto g = evaluate(cfg.control, x, rep.ledger, exec);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (m[i] - lambda * g[i]) + lambda * cfg.control_mean;
  const double zeta2 = sample_variance(z);
  rep.set_estimate(mean(z), zeta2 / static_cast<double>(n));
  rep.diagnostics["lambda"] = lambda;
  rep.diagnostics["lambda_auto"] = cfg.lambda ? 0.0 : 1.0;
  const double rho = correlation(m, g);
  if (std::isfinite(rho)) rep.diagnostics["rho_hat"] = rho;
  rep.diagnostics["zeta2"] = zeta2;
  rep.diagnostics["n"] = static_cast<double>(n);
  if (trace) {
    trace->inputs = x;
    trace->outputs = z;
    trace->weights.assign(n, 1.0);
  }
  return rep;
}

/// Real-valued two-level allocation for the remaining budget:
/// N1/N0 = sqrt(V1/C1) / sqrt(V0/C0), N0 C0 + N1 C1 = budget.
struct TwoLevelAllocation {
  double n0_real = 0.0;
  double n1_real = 0.0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

/// Floors the real optimum with at least 2 per term and hands any leftover
/// budget to the cheaper term.
inline TwoLevelAllocation two_level_allocation(double v0, double v1, double c0, double c1, double budget) {
  detail::require(c0 > 0.0 && c1 > 0.0, "two-level costs must be positive");
  detail::require(budget >= 2.0 * (c0 + c1), "budget does not cover 2 samples per term");
  TwoLevelAllocation a;
  if (v0 <= 0.0) {
    a.n0_real = 2.0;
    a.n1_real = (budget - 2.0 * c0) / c1;
  } else {
    const double ratio = std::sqrt(v1 / c1) / std::sqrt(v0 / c0);
    a.n0_real = budget / (c0 + ratio * c1);
    a.n1_real = ratio * a.n0_real;
  }
  a.n0 = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(a.n0_real)));
  a.n1 = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(a.n1_real)));
  while (static_cast<double>(a.n0) * c0 + static_cast<double>(a.n1) * c1 > budget) {
    if (a.n1 > 2) --a.n1; else --a.n0;
  }
  const double leftover = budget - static_cast<double>(a.n0) * c0 - static_cast<double>(a.n1) * c1;
  if (c0 <= c1) a.n0 += static_cast<std::size_t>(std::floor(leftover / c0));
  else a.n1 += static_cast<std::size_t>(std::floor(leftover / c1));
  return a;
}

struct TwoLevelOptions {
  std::size_t pilot = 50;
  std::size_t coarse_level = 0;
  std::size_t fine_level = 1;
};

/// Two-level estimator mean(M0) + mean(M1 - M0) on independent sample sets,
/// sized by the Lagrange ratio from pilot variances. Pilot cost comes out of
/// the budget and pilot samples are not reused.
inline EstimateReport two_level_estimate(const LevelHierarchy& h, double budget, const RngStream& rng,
                                         const TwoLevelOptions& opts = {}, const Executor& exec = {}) {
  detail::require(opts.coarse_level < opts.fine_level && opts.fine_level < h.size(),
                  "two_level: need coarse_level < fine_level within the hierarchy");
  detail::require(opts.pilot >= 2, "two_level: pilot must be at least 2");
  const std::size_t lc = opts.coarse_level;
  const std::size_t lf = opts.fine_level;
  const double c0 = h.model(lc).cost_per_eval();
  const double c1 = h.model(lf).cost_per_eval() + c0;
  const double pilot_cost = static_cast<double>(opts.pilot) * c1;
  if (budget < pilot_cost + 2.0 * (c0 + c1)) {
    throw estimator_error("two_level: budget " + std::to_string(budget) + " does not cover the pilot (" +
                          std::to_string(pilot_cost) + ") plus 2 samples per term");
  }

  EstimateReport rep;
  rep.method = Method::two_level;
  rep.seed = rng.seed;
  const auto pilot = coupled_samples(h, lf, lc, rng.substream(stream_tag::pilot), opts.pilot, rep.ledger, exec);
  const double v0 = sample_variance(pilot.coarse);
  const double v1 = sample_variance(pilot.differences());
  rep.diagnostics["pilot_V0"] = v0;
  rep.diagnostics["pilot_V1"] = v1;
  const double remaining = budget - rep.ledger.total();

  if (!(v1 > 0.0)) {
    // fine and coarse agree on the pilot: the correction term carries nothing
    rep.flags.push_back("degenerate_correction_coarse_only");
    const auto n0 = static_cast<std::size_t>(std::floor(remaining / c0));
    const InputBatch x = h.input(lc).draw_batch(rng, n0, exec);
    const auto y = evaluate(h.model(lc), x, rep.ledger, exec);
    rep.set_estimate(mean(y), sample_variance(y) / static_cast<double>(n0));
    rep.diagnostics["N0"] = static_cast<double>(n0);
    rep.diagnostics["N1"] = 0.0;
    return rep;
  }

  const auto alloc = two_level_allocation(v0, v1, c0, c1, remaining);
  const InputBatch x0 = h.input(lc).draw_batch(rng, alloc.n0, exec);
  const auto y0 = evaluate(h.model(lc), x0, rep.ledger, exec);
  const auto corr = coupled_samples(h, lf, lc, rng.with_offset(1), alloc.n1, rep.ledger, exec);
  const auto y1 = corr.differences();
  const double var0 = sample_variance(y0);
  const double var1 = sample_variance(y1);
  rep.set_estimate(mean(y0) + mean(y1),
                   var0 / static_cast<double>(alloc.n0) + var1 / static_cast<double>(alloc.n1));
  rep.diagnostics["N0"] = static_cast<double>(alloc.n0);
  rep.diagnostics["N1"] = static_cast<double>(alloc.n1);
  rep.diagnostics["N0_real"] = alloc.n0_real;
  rep.diagnostics["N1_real"] = alloc.n1_real;
  rep.diagnostics["mean_level0"] = mean(y0);
  rep.diagnostics["mean_correction"] = mean(y1);
  rep.diagnostics["V0"] = var0;
  rep.diagnostics["V1"] = var1;
  return rep;
}

/// Two-level estimate for a coarse/fine pair sharing one input space.
inline EstimateReport two_level_estimate(const Model& coarse, const Model& fine, const InputSampler& input,
                                         double budget, const RngStream& rng, std::size_t pilot = 50,
                                         const Executor& exec = {}) {
  const auto h = LevelHierarchy::shared_input({coarse, fine}, input);
  TwoLevelOptions opts;
  opts.pilot = pilot;
  return two_level_estimate(h, budget, rng, opts, exec);
}

}  // namespace uqmc
