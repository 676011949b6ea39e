#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "uqmc/errors.hpp"
#include "uqmc/models.hpp"
#include "uqmc/parallel.hpp"
#include "uqmc/report.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

/// Statistics of the level-l correction Y_l = M(l) - M(l-1), Y_0 = M(0).
struct LevelStats {
  std::size_t level = 0;
  double mean = 0.0;
  double variance = 0.0;
  /// Work units per coupled sample: cost(l) + cost(l-1).
  double cost = 0.0;
  std::size_t n = 0;
};

struct MlmcPlan {
  double eps = 0.0;
  std::vector<std::size_t> n;
  /// Unrounded optimum xi * sqrt(V/C).
  std::vector<double> n_real;
  std::size_t max_level = 0;
  double xi = 0.0;
  double predicted_cost = 0.0;
  double predicted_variance = 0.0;
  bool all_variances_zero = false;
};

inline double coupled_cost(const LevelHierarchy& h, std::size_t l) {
  return h.model(l).cost_per_eval() + (l > 0 ? h.model(l - 1).cost_per_eval() : 0.0);
}

namespace detail {

inline std::vector<double> level_corrections(const LevelHierarchy& h, std::size_t l, std::size_t n,
                                             const RngStream& stream, CostLedger& ledger, const Executor& exec) {
  std::optional<std::size_t> coarse;
  if (l > 0) coarse = l - 1;
  return coupled_samples(h, l, coarse, stream, n, ledger, exec).differences();
}

inline LevelStats summarize_level(std::size_t l, double cost, const std::vector<double>& y) {
  LevelStats s;
  s.level = l;
  s.n = y.size();
  s.mean = mean(y);
  s.variance = y.size() >= 2 ? sample_variance(y) : 0.0;
  s.cost = cost;
  return s;
}

}  // namespace detail

/// n coupled samples of Y_l; fine and coarse models see the same outcome.
inline LevelStats level_statistics(const LevelHierarchy& h, std::size_t l, std::size_t n, const RngStream& rng,
                                   CostLedger& ledger, const Executor& exec = {}) {
  detail::require(l < h.size(), "level " + std::to_string(l) + " is outside the hierarchy");
  detail::require(n >= 2, "level_statistics needs n >= 2");
  const auto y = detail::level_corrections(h, l, n, rng, ledger, exec);
  return detail::summarize_level(l, coupled_cost(h, l), y);
}

/// Lagrange-optimal sample counts for total variance eps^2:
/// xi = eps^-2 sum sqrt(V C), N_l = ceil(xi sqrt(V_l / C_l)) with a floor of 2.
inline MlmcPlan mlmc_allocation(const std::vector<LevelStats>& stats, double eps) {
  detail::require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  detail::require(!stats.empty(), "mlmc_allocation needs at least one level");
  MlmcPlan plan;
  plan.eps = eps;
  plan.max_level = stats.size() - 1;
  std::vector<double> root_vc(stats.size());
  for (std::size_t l = 0; l < stats.size(); ++l) {
    detail::require(stats[l].variance >= 0.0 && stats[l].cost > 0.0,
                    "level " + std::to_string(l) + ": need variance >= 0 and cost > 0");
    root_vc[l] = std::sqrt(stats[l].variance * stats[l].cost);
  }
  const double sum_root = pairwise_sum(root_vc);
  plan.xi = sum_root / (eps * eps);
  plan.all_variances_zero = sum_root == 0.0;
  plan.n.resize(stats.size());
  plan.n_real.resize(stats.size());
  for (std::size_t l = 0; l < stats.size(); ++l) {
    plan.n_real[l] = plan.xi * std::sqrt(stats[l].variance / stats[l].cost);
    plan.n[l] = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(plan.n_real[l])));
    plan.predicted_cost += static_cast<double>(plan.n[l]) * stats[l].cost;
    plan.predicted_variance += stats[l].variance / static_cast<double>(plan.n[l]);
  }
  return plan;
}

struct ConvergenceResult {
  bool converged = false;
  double alpha = 0.0;
  /// Extrapolated remaining bias estimate.
  double bias_estimate = 0.0;
};

/// Weak-rate fit log2|mean_l| ~ -alpha l over l >= 1 (alpha floored at 0.5)
/// and the bias check max(|Y_{L-1}| / 2^alpha, |Y_L|) / (2^alpha - 1) < eps / sqrt(2).
inline ConvergenceResult mlmc_convergence_test(const std::vector<LevelStats>& stats, double eps) {
  detail::require(eps > 0.0, "eps must be positive");
  detail::require(stats.size() >= 3, "convergence test needs at least 3 levels");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t l = 1; l < stats.size(); ++l) {
    const double a = std::abs(stats[l].mean);
    if (a == 0.0) continue;
    const double x = static_cast<double>(l);
    const double y = std::log2(a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  ConvergenceResult r;
  r.alpha = 0.5;
  if (m >= 2) {
    const double md = static_cast<double>(m);
    const double slope = (md * sxy - sx * sy) / (md * sxx - sx * sx);
    r.alpha = std::max(0.5, -slope);
  }
  const double p = std::exp2(r.alpha);
  const std::size_t L = stats.size() - 1;
  r.bias_estimate = std::max(std::abs(stats[L - 1].mean) / p, std::abs(stats[L].mean)) / (p - 1.0);
  r.converged = r.bias_estimate < eps / std::sqrt(2.0);
  return r;
}

struct MlmcOptions {
  std::size_t initial_samples = 100;
  /// Highest level the adaptive loop may add (defaults to the top of the hierarchy).
  std::optional<std::size_t> max_level;
  /// Run at exactly this L with variance target eps^2 and no convergence test.
  std::optional<std::size_t> fixed_level;
  std::optional<double> max_cost;
};

struct MlmcResult {
  EstimateReport report;
  MlmcPlan plan;
  std::vector<LevelStats> levels;
  std::optional<ConvergenceResult> convergence;
};

namespace detail {

class MlmcSampler {
 public:
  MlmcSampler(const LevelHierarchy& h, const RngStream& rng, CostLedger& ledger, const Executor& exec,
              std::optional<double> max_cost)
      : h_(h), rng_(rng), ledger_(ledger), exec_(exec), max_cost_(max_cost) {}

  std::size_t levels() const { return y_.size(); }

  /// Grows level l to `target` samples; level l uses stream id + l and the
  /// counter continues across top-ups.
  void top_up(std::size_t l, std::size_t target) {
    if (l >= y_.size()) y_.resize(l + 1);
    auto& y = y_[l];
    if (target <= y.size()) return;
    const std::size_t extra = target - y.size();
    if (max_cost_) {
      const double next = ledger_.total() + static_cast<double>(extra) * coupled_cost(h_, l);
      if (next > *max_cost_) {
        throw estimator_error("mlmc: cost cap " + std::to_string(*max_cost_) + " would be exceeded (needs " +
                              std::to_string(next) + ")");
      }
    }
    const RngStream s = rng_.with_offset(l).advanced(y.size());
    const auto more = level_corrections(h_, l, extra, s, ledger_, exec_);
    y.insert(y.end(), more.begin(), more.end());
  }

  std::vector<LevelStats> stats() const {
    std::vector<LevelStats> out;
    for (std::size_t l = 0; l < y_.size(); ++l) out.push_back(summarize_level(l, coupled_cost(h_, l), y_[l]));
    return out;
  }

 private:
  const LevelHierarchy& h_;
  RngStream rng_;
  CostLedger& ledger_;
  const Executor& exec_;
  std::optional<double> max_cost_;
  std::vector<std::vector<double>> y_;
};

inline void finish_mlmc(MlmcResult& res, const std::vector<LevelStats>& stats) {
  std::vector<double> means, vars;
  for (const auto& s : stats) {
    means.push_back(s.mean);
    vars.push_back(s.variance / static_cast<double>(s.n));
  }
  res.levels = stats;
  res.report.set_estimate(pairwise_sum(means), pairwise_sum(vars));
  res.report.diagnostics["L"] = static_cast<double>(stats.size() - 1);
  res.report.diagnostics["xi"] = res.plan.xi;
  res.report.diagnostics["predicted_cost"] = res.plan.predicted_cost;
  if (res.convergence) {
    res.report.diagnostics["alpha_hat"] = res.convergence->alpha;
    res.report.diagnostics["bias_estimate"] = res.convergence->bias_estimate;
  }
  if (res.plan.all_variances_zero) res.report.flags.push_back("all_level_variances_zero");
}

}  // namespace detail

/// Multilevel estimate sum_l mean(Y_l) with caller-chosen per-level counts.
inline MlmcResult mlmc_fixed_estimate(const LevelHierarchy& h, const std::vector<std::size_t>& n,
                                      const RngStream& rng, const Executor& exec = {}) {
  detail::require(!n.empty() && n.size() <= h.size(), "one sample count per level, within the hierarchy");
  MlmcResult res;
  res.report.method = Method::mlmc;
  res.report.seed = rng.seed;
  detail::MlmcSampler sampler(h, rng, res.report.ledger, exec, std::nullopt);
  for (std::size_t l = 0; l < n.size(); ++l) {
    detail::require(n[l] >= 2, "each level needs at least 2 samples");
    sampler.top_up(l, n[l]);
  }
  const auto stats = sampler.stats();
  res.plan.n = n;
  res.plan.max_level = n.size() - 1;
  for (const auto& s : stats) res.plan.predicted_cost += static_cast<double>(s.n) * s.cost;
  detail::finish_mlmc(res, stats);
  return res;
}

/// Adaptive multilevel Monte Carlo for a root-mean-square error target eps.
///
/// Starts at L = 2 with `initial_samples` per level, allocates for variance
/// eps^2 / 2, tops up, and adds levels until the bias check passes at
/// eps / sqrt(2). Hierarchies with fewer than 3 levels, or an explicit
/// `fixed_level`, run at fixed L with the full eps^2 variance target.
inline MlmcResult mlmc_estimate(const LevelHierarchy& h, double eps, const RngStream& rng,
                                const MlmcOptions& opts = {}, const Executor& exec = {}) {
  detail::require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  detail::require(opts.initial_samples >= 2, "initial_samples must be at least 2");
  const std::size_t top = std::min(h.max_level(), opts.max_level.value_or(h.max_level()));

  MlmcResult res;
  res.report.method = Method::mlmc;
  res.report.seed = rng.seed;
  detail::MlmcSampler sampler(h, rng, res.report.ledger, exec, opts.max_cost);

  const bool fixed = opts.fixed_level.has_value() || top < 2;
  if (fixed) {
    const std::size_t L = opts.fixed_level.value_or(top);
    detail::require(L < h.size(), "fixed_level is outside the hierarchy");
    for (std::size_t l = 0; l <= L; ++l) sampler.top_up(l, opts.initial_samples);
    res.plan = mlmc_allocation(sampler.stats(), eps);
    for (std::size_t l = 0; l <= L; ++l) sampler.top_up(l, res.plan.n[l]);
    if (!opts.fixed_level) res.report.flags.push_back("convergence_test_skipped_fewer_than_3_levels");
    detail::finish_mlmc(res, sampler.stats());
    return res;
  }

  const double var_eps = eps / std::sqrt(2.0);
  std::size_t L = 2;
  for (std::size_t l = 0; l <= L; ++l) sampler.top_up(l, opts.initial_samples);
  for (;;) {
    res.plan = mlmc_allocation(sampler.stats(), var_eps);
    for (std::size_t l = 0; l <= L; ++l) sampler.top_up(l, res.plan.n[l]);
    res.convergence = mlmc_convergence_test(sampler.stats(), eps);
    if (res.convergence->converged) break;
    if (L >= top) {
      res.report.flags.push_back("bias_target_unmet");
      break;
    }
    ++L;
    sampler.top_up(L, opts.initial_samples);
  }
  detail::finish_mlmc(res, sampler.stats());
  return res;
}

}  // namespace uqmc
