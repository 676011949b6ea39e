#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/mixture.hpp"
#include "uqmc/models.hpp"
#include "uqmc/parallel.hpp"
#include "uqmc/report.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

/// Importance-sampling estimate of E_p[M(X)] from n draws of q (scalar
/// input). Weights w = p/q are the plain density ratio; the variance
/// estimate is (1/n) sum (w M - mean)^2 divided by n.
template <class Target, class Proposal>
EstimateReport is_estimate(const Model& model, const Target& p, const Proposal& q, std::size_t n,
                           const RngStream& rng, const Executor& exec = {}) {
  detail::require(n >= 2, "is_estimate needs n >= 2");
  detail::require(model.input_dim() == 1, "importance sampling works on scalar-input models");
  EstimateReport rep;
  rep.method = Method::is;
  rep.seed = rng.seed;
  InputBatch x(n, 1);
  parallel_for(exec, n, [&](std::size_t i) {
    auto g = rng.at(i);
    x.row(i)[0] = draw(q, g);
  });
  std::vector<double> w(n);
  parallel_for(exec, n, [&](std::size_t i) {
    const double xi = x.row(i)[0];
    const double lq = log_density(q, xi);
    const double lp = log_density(p, xi);
    if (!std::isfinite(lq)) {
      throw numeric_error("importance weight undefined at sample " + std::to_string(i) + " (x = " +
                          std::to_string(xi) + "): proposal density is zero");
    }
    w[i] = lp == -kInf ? 0.0 : std::exp(lp - lq);
    if (!std::isfinite(w[i])) {
      throw numeric_error("non-finite importance weight at sample " + std::to_string(i) + " (x = " +
                          std::to_string(xi) + ")");
    }
  });
  const auto y = evaluate(model, x, rep.ledger, exec);
  std::vector<double> wy(n);
  for (std::size_t i = 0; i < n; ++i) wy[i] = w[i] * y[i];
  const double mu = mean(wy);
  const double s2 = biased_variance(wy);
  rep.set_estimate(mu, s2 / static_cast<double>(n));
  rep.diagnostics["ess"] = weights_ess(w);
  rep.diagnostics["mean_weight"] = mean(w);
  rep.diagnostics["n"] = static_cast<double>(n);
  return rep;
}

/// Samples and model outputs of one propagation, reusable for reweighting.
struct PropagationCache {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> log_q;
};

/// Distribution of the per-target estimates s_j.
struct MultimodelReport {
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::vector<double> ess;
  /// 5%, 25%, 50%, 75%, 95% quantiles of the estimates.
  std::vector<double> quantiles;
  std::size_t n = 0;
  CostLedger ledger;
  std::vector<std::string> flags;
};

inline const std::vector<double>& multimodel_quantile_levels() {
  static const std::vector<double> p = {0.05, 0.25, 0.5, 0.75, 0.95};
  return p;
}

/// s_j = (1/n) sum_i p_j(x_i) / q(x_i) M(x_i) for every target from cached
/// samples; no model evaluations.
inline MultimodelReport reweight(const PropagationCache& cache, const std::vector<Distribution>& targets,
                                 const Executor& exec = {}) {
  detail::require(!targets.empty(), "need at least one target density");
  const std::size_t n = cache.x.size();
  detail::require(n >= 2 && cache.y.size() == n && cache.log_q.size() == n, "propagation cache is incomplete");
  MultimodelReport rep;
  rep.n = n;
  const std::size_t T = targets.size();
  rep.estimates.resize(T);
  rep.std_errors.resize(T);
  rep.ess.resize(T);
  parallel_for(exec, T, [&](std::size_t j) {
    std::vector<double> w(n), wy(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double lp = log_density(targets[j], cache.x[i]);
      w[i] = lp == -kInf ? 0.0 : std::exp(lp - cache.log_q[i]);
      wy[i] = w[i] * cache.y[i];
    }
    rep.estimates[j] = mean(wy);
    rep.std_errors[j] = std::sqrt(biased_variance(wy) / static_cast<double>(n));
    rep.ess[j] = weights_ess(w);
  });
  for (double p : multimodel_quantile_levels()) rep.quantiles.push_back(quantile(std::span<const double>(rep.estimates), p));
  return rep;
}

inline MultimodelReport reweight(const PropagationCache& cache, const CandidateModelSet& targets,
                                 const Executor& exec = {}) {
  return reweight(cache, targets.entries, exec);
}

/// One shared sample of n draws from q, n model evaluations, then
/// reweighting to every target. Every target support must lie inside the
/// support of q.
inline MultimodelReport propagate_multimodel(const Model& model, const MixtureDensity& q,
                                             const std::vector<Distribution>& targets, std::size_t n,
                                             const RngStream& rng, const Executor& exec = {},
                                             PropagationCache* cache_out = nullptr) {
  detail::require(n >= 2, "propagate_multimodel needs n >= 2");
  detail::require(model.input_dim() == 1, "multimodel propagation works on scalar-input models");
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (!q.covers(targets[j])) {
      throw numeric_error("target " + std::to_string(j) + " (" + family_name(targets[j].family()) +
                          ") has support outside the proposal mixture");
    }
  }
  PropagationCache cache;
  cache.x.resize(n);
  cache.log_q.resize(n);
  parallel_for(exec, n, [&](std::size_t i) {
    auto g = rng.at(i);
    cache.x[i] = q.sample(g);
    cache.log_q[i] = q.log_pdf(cache.x[i]);
  });
  CostLedger ledger;
  InputBatch xb(n, 1);
  for (std::size_t i = 0; i < n; ++i) xb.row(i)[0] = cache.x[i];
  cache.y = evaluate(model, xb, ledger, exec);
  MultimodelReport rep = reweight(cache, targets, exec);
  rep.ledger = ledger;
  if (cache_out) *cache_out = std::move(cache);
  return rep;
}

inline MultimodelReport propagate_multimodel(const Model& model, const MixtureDensity& q,
                                             const CandidateModelSet& targets, std::size_t n, const RngStream& rng,
                                             const Executor& exec = {}, PropagationCache* cache_out = nullptr) {
  return propagate_multimodel(model, q, targets.entries, n, rng, exec, cache_out);
}

inline void to_json(nlohmann::json& j, const MultimodelReport& r) {
  nlohmann::json q = nlohmann::json::object();
  const auto& levels = multimodel_quantile_levels();
  const char* names[] = {"q05", "q25", "q50", "q75", "q95"};
  for (std::size_t i = 0; i < levels.size(); ++i) q[names[i]] = r.quantiles[i];
  nlohmann::json n = nlohmann::json::object();
  for (const auto& [id, e] : r.ledger.entries()) n[id] = e.count;
  j = nlohmann::json{{"n", r.n},
                     {"ensemble_size", r.estimates.size()},
                     {"quantiles", q},
                     {"mean_of_estimates", mean(r.estimates)},
                     {"min_ess", *std::min_element(r.ess.begin(), r.ess.end())},
                     {"median_ess", quantile(std::span<const double>(r.ess), 0.5)},
                     {"n_per_model", n},
                     {"total_cost", r.ledger.total()},
                     {"flags", r.flags}};
}

}  // namespace uqmc
