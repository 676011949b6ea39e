#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/distributions.hpp"
#include "uqmc/importance.hpp"
#include "uqmc/inference.hpp"
#include "uqmc/mixture.hpp"
#include "uqmc/models.hpp"
#include "uqmc/rng.hpp"

namespace uqmc {

inline std::vector<Family> default_mmmc_families() {
  return {Family::normal, Family::lognormal, Family::gamma, Family::weibull};
}

struct MmmcOptions {
  std::vector<Family> families = default_mmmc_families();
  InferenceMethod inference = InferenceMethod::aic;
  /// Model priors for Bayes weights; empty means uniform over `families`.
  std::vector<double> model_prior;
  std::size_t evidence_samples = 100000;
  McmcOptions mcmc;
  MixtureMode mixture = MixtureMode::weighted;
  std::size_t max_components_per_family = 500;
  std::size_t ensemble_size = 100;
  std::size_t samples = 5000;
};

struct MmmcResult {
  ModelProbabilities probabilities;
  /// Posterior samples per family, thinned to the mixture cap.
  PosteriorMap posteriors;
  MixtureDensity mixture{Distribution::normal(0.0, 1.0)};
  CandidateModelSet candidates;
  MultimodelReport report;
  PropagationCache cache;
};

/// Family probabilities for the configured inference method. Families whose
/// support excludes the data get probability 0.
inline ModelProbabilities infer_family_probabilities(const Dataset& data, const MmmcOptions& opts,
                                                     const RngStream& rng) {
  detail::require(!opts.families.empty(), "need at least one candidate family");
  if (opts.inference == InferenceMethod::aic) return aic_weights(opts.families, data);

  std::vector<double> prior = opts.model_prior;
  if (prior.empty()) prior.assign(opts.families.size(), 1.0 / static_cast<double>(opts.families.size()));
  detail::require(prior.size() == opts.families.size(), "one model prior per family");
  std::vector<BayesCandidate> cands;
  std::vector<double> cand_prior;
  std::vector<std::size_t> where;
  double kept = 0.0;
  for (std::size_t j = 0; j < opts.families.size(); ++j) {
    if (!family_supports(opts.families[j], data)) continue;
    cands.push_back({opts.families[j], default_prior(opts.families[j], data)});
    cand_prior.push_back(prior[j]);
    where.push_back(j);
    kept += prior[j];
  }
  if (cands.empty() || kept <= 0.0) throw estimator_error("no candidate family supports the data");
  for (double& p : cand_prior) p /= kept;
  const auto sub = bayes_weights(cands, data, cand_prior, opts.evidence_samples, rng);

  ModelProbabilities mp;
  mp.method = InferenceMethod::bayes;
  mp.families = opts.families;
  mp.pi.assign(opts.families.size(), 0.0);
  mp.score.assign(opts.families.size(), -kInf);
  mp.score_se.assign(opts.families.size(), 0.0);
  mp.mle.assign(opts.families.size(), std::nullopt);
  mp.flags = sub.flags;
  for (std::size_t c = 0; c < where.size(); ++c) {
    mp.pi[where[c]] = sub.pi[c];
    mp.score[where[c]] = sub.score[c];
    mp.score_se[where[c]] = sub.score_se[c];
    mp.mle[where[c]] = sub.mle[c];
  }
  for (std::size_t j = 0; j < opts.families.size(); ++j) {
    if (!family_supports(opts.families[j], data)) mp.flags.push_back("infeasible_family:" + family_name(opts.families[j]));
  }
  return mp;
}

namespace detail {

inline std::uint64_t family_slot(Family f) {
  for (std::size_t i = 0; i < kAllFamilies.size(); ++i)
    if (kAllFamilies[i] == f) return i;
  return 0;
}

}  // namespace detail

/// Full multimodel pipeline: family probabilities, per-family MCMC
/// posteriors under default priors, optimal mixture proposal, candidate
/// ensemble and single-loop propagation through `model`.
inline MmmcResult run_mmmc(const Model& model, const Dataset& data, const MmmcOptions& opts, const RngStream& rng,
                           const Executor& exec = {}) {
  MmmcResult res;
  res.probabilities = infer_family_probabilities(data, opts, rng);
  const auto& mp = res.probabilities;
  const RngStream chains = rng.substream(stream_tag::mcmc);
  for (std::size_t j = 0; j < mp.families.size(); ++j) {
    const Family f = mp.families[j];
    const bool needed = mp.pi[j] > 0.0 || (opts.mixture == MixtureMode::equal && mp.mle[j].has_value());
    if (!needed || res.posteriors.count(f)) continue;
    const auto post = posterior_sample(f, data, default_prior(f, data), opts.mcmc,
                                       chains.with_offset(detail::family_slot(f)));
    res.posteriors.emplace(f, post.thinned(opts.max_components_per_family));
  }
  res.mixture = optimal_mixture(mp, res.posteriors, opts.mixture, opts.max_components_per_family);
  res.candidates = build_candidate_set(mp, res.posteriors, opts.ensemble_size, rng.substream(stream_tag::ensemble));
  res.report = propagate_multimodel(model, res.mixture, res.candidates, opts.samples, rng, exec, &res.cache);
  for (const auto& f : mp.flags) res.report.flags.push_back(f);
  for (const auto& [f, p] : res.posteriors)
    for (const auto& fl : p.flags) res.report.flags.push_back(family_name(f) + ":" + fl);
  return res;
}

}  // namespace uqmc
