#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/errors.hpp"
#include "uqmc/mc.hpp"
#include "uqmc/models.hpp"
#include "uqmc/report.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

/// Pilot estimates for a high-fidelity model and k low-fidelity models.
/// `rho` carries a trailing 0 (rho_{k+1}); `index` maps each low model back
/// to its position in the ensemble.
struct PilotStats {
  double sigma_hi = 0.0;
  std::vector<double> sigma;
  std::vector<double> rho;
  double cost_hi = 0.0;
  std::vector<double> cost;
  std::vector<std::size_t> index;
  std::size_t n_pilot = 0;
  /// Ensemble indices of low models removed by validate_ordering.
  std::vector<std::size_t> dropped;

  std::size_t k() const { return sigma.size(); }

  /// Builds stats from explicit values; rho excludes the trailing 0.
  static PilotStats from_values(double sigma_hi, double cost_hi, std::vector<double> sigma,
                                std::vector<double> rho, std::vector<double> cost) {
    detail::require(sigma.size() == rho.size() && rho.size() == cost.size(), "pilot vectors must match in length");
    PilotStats s;
    s.sigma_hi = sigma_hi;
    s.cost_hi = cost_hi;
    s.sigma = std::move(sigma);
    s.rho = std::move(rho);
    s.rho.push_back(0.0);
    s.cost = std::move(cost);
    s.index.resize(s.sigma.size());
    std::iota(s.index.begin(), s.index.end(), std::size_t{0});
    return s;
  }
};

struct MfmcPlan {
  std::vector<double> beta;
  /// t_0 = 1 followed by t_1..t_k.
  std::vector<double> t;
  /// Real-valued optimum n_0..n_k.
  std::vector<double> n_real;
  /// Integer counts after repair, non-decreasing.
  std::vector<std::size_t> n;
  double chi = 1.0;
  double budget = 0.0;
  double planned_cost = 0.0;
  /// Estimator variance at the integer counts.
  double predicted_variance = 0.0;
  bool surrogate_shortcut = false;
};

/// sigma_hi^2 / n_0 + sum_i (1/n_{i-1} - 1/n_i)(beta_i^2 sigma_i^2 - 2 beta_i rho_i sigma_hi sigma_i).
inline double mfmc_variance(const PilotStats& s, const std::vector<double>& beta, const std::vector<double>& n) {
  detail::require(beta.size() == s.k() && n.size() == s.k() + 1, "mfmc_variance: size mismatch");
  double v = s.sigma_hi * s.sigma_hi / n[0];
  for (std::size_t i = 1; i <= s.k(); ++i) {
    const double b = beta[i - 1];
    const double si = s.sigma[i - 1];
    v += (1.0 / n[i - 1] - 1.0 / n[i]) * (b * b * si * si - 2.0 * b * s.rho[i - 1] * s.sigma_hi * si);
  }
  return v;
}

/// All models evaluated on the same n_pilot inputs.
inline PilotStats pilot_statistics(const FidelityEnsemble& e, std::size_t n_pilot, const RngStream& rng,
                                   CostLedger& ledger, const Executor& exec = {}) {
  detail::require(n_pilot >= 10, "pilot needs at least 10 samples");
  const InputBatch x = e.input.draw_batch(rng, n_pilot, exec);
  const auto hi = evaluate(e.high, x, ledger, exec);
  PilotStats s;
  s.n_pilot = n_pilot;
  s.cost_hi = e.high.cost_per_eval();
  s.sigma_hi = std::sqrt(sample_variance(hi));
  if (!(s.sigma_hi > 0.0)) throw estimator_error("model '" + e.high.id() + "' is constant on the pilot sample");
  for (std::size_t i = 0; i < e.lows.size(); ++i) {
    const auto lo = evaluate(e.lows[i], x, ledger, exec);
    const double sd = std::sqrt(sample_variance(lo));
    if (!(sd > 0.0)) throw estimator_error("model '" + e.lows[i].id() + "' is constant on the pilot sample");
    s.sigma.push_back(sd);
    s.rho.push_back(correlation(hi, lo));
    s.cost.push_back(e.lows[i].cost_per_eval());
    s.index.push_back(i);
  }
  s.rho.push_back(0.0);
  return s;
}

namespace detail {

inline PilotStats keep_lows(const PilotStats& s, const std::vector<std::size_t>& order) {
  PilotStats out = s;
  out.sigma.clear();
  out.rho.clear();
  out.cost.clear();
  out.index.clear();
  for (std::size_t j : order) {
    out.sigma.push_back(s.sigma[j]);
    out.rho.push_back(s.rho[j]);
    out.cost.push_back(s.cost[j]);
    out.index.push_back(s.index[j]);
  }
  out.rho.push_back(0.0);
  return out;
}

/// Positions i (1-based) where c_{i-1}/c_i > (rho_{i-1}^2 - rho_i^2)/(rho_i^2 - rho_{i+1}^2) fails.
inline std::vector<std::size_t> ordering_violations(const PilotStats& s) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 1; i <= s.k(); ++i) {
    const double c_prev = i == 1 ? s.cost_hi : s.cost[i - 2];
    const double r_prev = i == 1 ? 1.0 : s.rho[i - 2] * s.rho[i - 2];
    const double r = s.rho[i - 1] * s.rho[i - 1];
    const double r_next = s.rho[i] * s.rho[i];
    const double gap = r - r_next;
    const double lhs = c_prev * gap;
    const double rhs = s.cost[i - 1] * (r_prev - r);
    if (!(gap > 0.0) || !(lhs > rhs)) bad.push_back(i);
  }
  return bad;
}

}  // namespace detail

/// Sorts low models by descending rho^2 and drops, one at a time and
/// cheapest first, models at positions that violate the cost/correlation
/// condition (c_0 = c_hi, rho_0 = 1) until all positions satisfy it.
inline PilotStats validate_ordering(const PilotStats& stats) {
  detail::require(stats.rho.size() == stats.k() + 1 && stats.cost.size() == stats.k() &&
                      stats.index.size() == stats.k(),
                  "pilot stats are incomplete");
  std::vector<std::size_t> order(stats.k());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stats.rho[a] * stats.rho[a] > stats.rho[b] * stats.rho[b];
  });
  PilotStats cur = detail::keep_lows(stats, order);
  for (;;) {
    const auto bad = detail::ordering_violations(cur);
    if (bad.empty()) break;
    std::size_t drop = bad.front() - 1;
    for (std::size_t i : bad) {
      if (cur.cost[i - 1] < cur.cost[drop]) drop = i - 1;
    }
    cur.dropped.push_back(cur.index[drop]);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < cur.k(); ++j) {
      if (j != drop) keep.push_back(j);
    }
    cur = detail::keep_lows(cur, keep);
  }
  return cur;
}

namespace detail {

inline void repair_counts(MfmcPlan& plan, const PilotStats& s) {
  const std::size_t k = s.k();
  auto cost_of = [&](std::size_t i) { return i == 0 ? s.cost_hi : s.cost[i - 1]; };
  plan.n.assign(k + 1, 0);
  for (std::size_t i = 0; i <= k; ++i) plan.n[i] = static_cast<std::size_t>(std::floor(plan.n_real[i]));
  plan.n[0] = std::max<std::size_t>(2, plan.n[0]);
  for (std::size_t i = 1; i <= k; ++i) plan.n[i] = std::max(plan.n[i], plan.n[i - 1]);
  auto total = [&] {
    double c = 0.0;
    for (std::size_t i = 0; i <= k; ++i) c += static_cast<double>(plan.n[i]) * cost_of(i);
    return c;
  };
  // Trim from the cheap end while keeping n non-decreasing and n_0 >= 2.
  for (std::size_t i = k + 1; i-- > 0 && total() > plan.budget;) {
    const std::size_t floor_i = i == 0 ? 2 : plan.n[i - 1];
    const double excess = total() - plan.budget;
    const auto want = static_cast<std::size_t>(std::ceil(excess / cost_of(i)));
    const std::size_t room = plan.n[i] - floor_i;
    plan.n[i] -= std::min(want, room);
  }
  // Whatever is still over must come from shrinking the prefix jointly.
  while (total() > plan.budget && plan.n[0] > 2) {
    --plan.n[0];
    for (std::size_t i = 1; i <= k; ++i) {
      if (plan.n[i] > plan.n[i - 1]) {
        const double excess = total() - plan.budget;
        if (excess <= 0.0) break;
        const auto want = static_cast<std::size_t>(std::ceil(excess / cost_of(i)));
        plan.n[i] -= std::min(want, plan.n[i] - plan.n[i - 1]);
      }
    }
  }
  plan.planned_cost = total();
}

}  // namespace detail

/// Closed-form MFMC plan for budget C*: beta_i = rho_i sigma_hi / sigma_i,
/// t_i = sqrt(c_hi (rho_i^2 - rho_{i+1}^2) / (c_i (1 - rho_1^2))),
/// n_0 = C* / (c^T t), n_i = n_0 t_i, then integer repair.
inline MfmcPlan mfmc_plan(const PilotStats& s, double budget) {
  const std::size_t k = s.k();
  detail::require(s.sigma_hi > 0.0 && s.cost_hi > 0.0, "pilot stats need sigma_hi > 0 and c_hi > 0");
  double min_cost = s.cost_hi;
  for (double c : s.cost) min_cost += c;
  if (!(budget >= 2.0 * min_cost)) {
    throw estimator_error("mfmc: budget " + std::to_string(budget) + " is below two evaluations of every model (" +
                          std::to_string(2.0 * min_cost) + ")");
  }
  MfmcPlan plan;
  plan.budget = budget;
  const double one_minus = k == 0 ? 1.0 : 1.0 - s.rho[0] * s.rho[0];

  if (k > 0 && one_minus <= 1e-12) {
    // Perfect surrogate: t_1 is unbounded, so spend the minimum on M_hi and the
    // rest on the first low model.
    plan.surrogate_shortcut = true;
    plan.beta = {s.rho[0] * s.sigma_hi / s.sigma[0]};
    plan.t = {1.0, kInf};
    plan.n = {2, static_cast<std::size_t>(std::floor((budget - 2.0 * s.cost_hi) / s.cost[0]))};
    plan.n_real = {2.0, static_cast<double>(plan.n[1])};
    plan.chi = s.cost[0] / s.cost_hi;
    plan.planned_cost = 2.0 * s.cost_hi + static_cast<double>(plan.n[1]) * s.cost[0];
    PilotStats one = detail::keep_lows(s, {0});
    plan.predicted_variance =
        mfmc_variance(one, plan.beta, {static_cast<double>(plan.n[0]), static_cast<double>(plan.n[1])});
    return plan;
  }

  plan.t.assign(k + 1, 1.0);
  plan.beta.resize(k);
  double ct = s.cost_hi;
  double root_sum = std::sqrt(one_minus);
  for (std::size_t i = 1; i <= k; ++i) {
    const double gap = s.rho[i - 1] * s.rho[i - 1] - s.rho[i] * s.rho[i];
    plan.beta[i - 1] = s.rho[i - 1] * s.sigma_hi / s.sigma[i - 1];
    plan.t[i] = std::sqrt(s.cost_hi * gap / (s.cost[i - 1] * one_minus));
    ct += s.cost[i - 1] * plan.t[i];
    root_sum += std::sqrt(s.cost[i - 1] / s.cost_hi * gap);
  }
  plan.chi = root_sum * root_sum;
  const double n0 = budget / ct;
  plan.n_real.resize(k + 1);
  for (std::size_t i = 0; i <= k; ++i) plan.n_real[i] = n0 * plan.t[i];
  detail::repair_counts(plan, s);
  std::vector<double> nd(plan.n.begin(), plan.n.end());
  plan.predicted_variance = mfmc_variance(s, plan.beta, nd);
  return plan;
}

struct MfmcOptions {
  std::size_t pilot = 50;
  /// Replaces the pilot-derived coefficients (one per surviving low model).
  std::optional<std::vector<double>> beta;
};

struct MfmcResult {
  EstimateReport report;
  PilotStats pilot;
  MfmcPlan plan;
  /// Per-level sample means used in the estimator: hi on n_0, then for each
  /// low model (mean on n_i, mean on n_{i-1}).
  double mean_hi = 0.0;
  std::vector<double> mean_lo_full;
  std::vector<double> mean_lo_prefix;
};

/// Evaluates a fixed plan on fresh samples from `rng`: M_hi on the first n_0
/// inputs and low model i on the first n_i, reusing prefixes exactly.
inline MfmcResult mfmc_execute(const FidelityEnsemble& e, const PilotStats& s, const MfmcPlan& plan,
                               const RngStream& rng, CostLedger& ledger, const Executor& exec = {}) {
  const std::size_t k = s.k();
  detail::require(plan.n.size() == k + 1 && plan.beta.size() == k, "plan does not match the pilot stats");
  MfmcResult res;
  res.pilot = s;
  res.plan = plan;
  const InputBatch x = e.input.draw_batch(rng, plan.n.back(), exec);
  const auto hi = evaluate(e.high, x.prefix(plan.n[0]), ledger, exec);
  res.mean_hi = mean(hi);
  std::vector<double> terms{res.mean_hi};
  for (std::size_t i = 1; i <= k; ++i) {
    const auto lo = evaluate(e.lows[s.index[i - 1]], x.prefix(plan.n[i]), ledger, exec);
    const double full = mean(lo);
    const double prefix = mean(std::span<const double>(lo.data(), plan.n[i - 1]));
    res.mean_lo_full.push_back(full);
    res.mean_lo_prefix.push_back(prefix);
    terms.push_back(plan.beta[i - 1] * (full - prefix));
  }
  std::vector<double> nd(plan.n.begin(), plan.n.end());
  res.report.set_estimate(pairwise_sum(terms), mfmc_variance(s, plan.beta, nd));
  return res;
}

/// Multifidelity estimate within total budget C* (pilot included).
inline MfmcResult mfmc_estimate(const FidelityEnsemble& e, double budget, const RngStream& rng,
                                const MfmcOptions& opts = {}, const Executor& exec = {}) {
  CostLedger ledger;
  double pilot_cost = opts.pilot * e.high.cost_per_eval();
  for (const auto& m : e.lows) pilot_cost += opts.pilot * m.cost_per_eval();
  if (budget <= pilot_cost) {
    throw estimator_error("mfmc: budget " + std::to_string(budget) + " does not cover the pilot (" +
                          std::to_string(pilot_cost) + ")");
  }
  const PilotStats raw = pilot_statistics(e, opts.pilot, rng.substream(stream_tag::pilot), ledger, exec);
  PilotStats s = validate_ordering(raw);
  const double remaining = budget - ledger.total();

  std::vector<std::string> flags;
  for (std::size_t d : s.dropped) flags.push_back("dropped_low_model:" + e.lows[d].id());

  if (s.k() == 0) {
    const auto n = static_cast<std::size_t>(std::floor(remaining / e.high.cost_per_eval()));
    if (n < 2) throw estimator_error("mfmc: budget left after the pilot is below two high-fidelity evaluations");
    MfmcResult res;
    res.pilot = s;
    res.report = mc_estimate(e.high, e.input, n, rng, exec);
    res.report.ledger.merge(ledger);
    res.plan.budget = remaining;
    res.plan.n = {n};
    res.plan.n_real = {remaining / e.high.cost_per_eval()};
    res.plan.t = {1.0};
    res.plan.planned_cost = static_cast<double>(n) * e.high.cost_per_eval();
    res.plan.predicted_variance = s.sigma_hi * s.sigma_hi / static_cast<double>(n);
    res.mean_hi = res.report.estimate;
    flags.push_back("all_low_models_dropped_plain_mc");
    res.report.method = Method::mfmc;
    res.report.flags = flags;
    return res;
  }

  MfmcPlan plan = mfmc_plan(s, remaining);
  if (plan.surrogate_shortcut) {
    for (std::size_t j = 1; j < s.k(); ++j) flags.push_back("dropped_low_model:" + e.lows[s.index[j]].id());
    s = detail::keep_lows(s, {0});
    flags.push_back("perfect_surrogate_shortcut");
  }
  if (opts.beta) {
    detail::require(opts.beta->size() == s.k(), "beta override needs one value per low model in use");
    plan.beta = *opts.beta;
    std::vector<double> nd(plan.n.begin(), plan.n.end());
    plan.predicted_variance = mfmc_variance(s, plan.beta, nd);
    flags.push_back("beta_overridden");
  }
  MfmcResult res = mfmc_execute(e, s, plan, rng, ledger, exec);
  res.report.method = Method::mfmc;
  res.report.seed = rng.seed;
  res.report.ledger = ledger;
  res.report.flags = flags;
  res.report.diagnostics["chi"] = plan.chi;
  res.report.diagnostics["sigma_hi"] = s.sigma_hi;
  res.report.diagnostics["pilot_n"] = static_cast<double>(opts.pilot);
  res.report.diagnostics["planned_cost"] = plan.planned_cost;
  return res;
}

inline void to_json(nlohmann::json& j, const PilotStats& s) {
  const std::vector<double> rho(s.rho.begin(), s.rho.begin() + static_cast<std::ptrdiff_t>(s.k()));
  j = nlohmann::json{{"sigma_hi", s.sigma_hi}, {"sigma", s.sigma},  {"rho", rho},
                     {"cost_hi", s.cost_hi},   {"cost", s.cost},    {"model_index", s.index},
                     {"n_pilot", s.n_pilot},   {"dropped", s.dropped}};
}

inline void to_json(nlohmann::json& j, const MfmcPlan& p) {
  nlohmann::json t = nlohmann::json::array();
  for (double v : p.t) t.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  j = nlohmann::json{{"beta", p.beta},
                     {"t", t},
                     {"n", p.n},
                     {"n_real", p.n_real},
                     {"chi", p.chi},
                     {"budget", p.budget},
                     {"planned_cost", p.planned_cost},
                     {"predicted_variance", p.predicted_variance},
                     {"surrogate_shortcut", p.surrogate_shortcut}};
}

}  // namespace uqmc
