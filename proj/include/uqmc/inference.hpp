#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

enum class InferenceMethod { aic, bayes };

inline std::string inference_name(InferenceMethod m) { return m == InferenceMethod::aic ? "aic" : "bayes"; }

/// Probabilities over candidate distribution families. `score` holds the
/// AIC differences (aic) or log-evidences (bayes), +inf / -inf for
/// infeasible families.
struct ModelProbabilities {
  std::vector<Family> families;
  std::vector<double> pi;
  InferenceMethod method = InferenceMethod::aic;
  std::vector<double> score;
  std::vector<double> score_se;
  std::vector<std::optional<Distribution>> mle;
  std::vector<std::string> flags;

  double probability(Family f) const {
    for (std::size_t i = 0; i < families.size(); ++i)
      if (families[i] == f) return pi[i];
    return 0.0;
  }
};

namespace detail {

/// exp(a_i - max) / sum, exact zeros for -inf entries.
inline std::vector<double> softmax(const std::vector<double>& a) {
  double m = -kInf;
  for (double v : a) m = std::max(m, v);
  if (m == -kInf) throw estimator_error("no candidate has positive probability");
  std::vector<double> w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w[i] = a[i] == -kInf ? 0.0 : std::exp(a[i] - m);
  const double s = pairwise_sum(w);
  for (double& v : w) v /= s;
  return w;
}

}  // namespace detail

/// pi_i = exp(-delta_i / 2) / sum_j exp(-delta_j / 2) with delta_i = AIC_i - AIC_min.
/// +inf marks an infeasible model (pi = 0).
inline std::vector<double> aic_probabilities(const std::vector<double>& aic) {
  detail::require(!aic.empty(), "need at least one AIC value");
  std::vector<double> a(aic.size());
  for (std::size_t i = 0; i < aic.size(); ++i) a[i] = aic[i] == kInf ? -kInf : -0.5 * aic[i];
  return detail::softmax(a);
}

/// pi_i proportional to evidence_i * prior_i, computed from log-evidences.
inline std::vector<double> bayes_probabilities(const std::vector<double>& log_evidence,
                                               const std::vector<double>& model_prior) {
  detail::require(log_evidence.size() == model_prior.size() && !log_evidence.empty(),
                  "one model prior per log-evidence");
  double total = 0.0;
  for (double p : model_prior) {
    detail::require(p >= 0.0, "model priors must be non-negative");
    total += p;
  }
  detail::require(std::abs(total - 1.0) < 1e-9, "model priors must sum to 1");
  std::vector<double> a(log_evidence.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = model_prior[i] == 0.0 ? -kInf : log_evidence[i] + std::log(model_prior[i]);
  }
  try {
    return detail::softmax(a);
  } catch (const estimator_error&) {
    throw estimator_error("all model evidences are zero");
  }
}

/// AIC = -2 log L(theta_hat) + 2K for each family that supports the data.
inline ModelProbabilities aic_weights(const std::vector<Family>& families, const Dataset& data) {
  detail::require(!families.empty(), "need at least one candidate family");
  detail::require(data.size() >= 3, "AIC weights need at least 3 data points");
  ModelProbabilities mp;
  mp.method = InferenceMethod::aic;
  mp.families = families;
  std::vector<double> aic;
  for (Family f : families) {
    std::optional<Distribution> fit;
    double a = kInf;
    if (family_supports(f, data)) {
      try {
        const auto r = mle_fit(f, data);
        fit = r.distribution;
        a = -2.0 * r.log_likelihood + 2.0 * static_cast<double>(family_info(f).param_count);
      } catch (const invalid_argument&) {
      } catch (const numeric_error&) {
      }
    }
    if (!fit) mp.flags.push_back("infeasible_family:" + family_name(f));
    mp.mle.push_back(fit);
    aic.push_back(a);
  }
  if (std::all_of(aic.begin(), aic.end(), [](double v) { return v == kInf; })) {
    throw estimator_error("no candidate family can be fitted to the data");
  }
  mp.pi = aic_probabilities(aic);
  const double amin = *std::min_element(aic.begin(), aic.end());
  for (double a : aic) mp.score.push_back(a == kInf ? kInf : a - amin);
  mp.score_se.assign(aic.size(), 0.0);
  return mp;
}

// ---------------------------------------------------------------- priors

struct PointMass {
  double value;
};

/// Density proportional to 1/x on [lower, upper].
struct LogUniform {
  double lower;
  double upper;
};

using ParameterPrior = std::variant<PointMass, Distribution, LogUniform>;

/// One prior per family parameter.
using FamilyPrior = std::vector<ParameterPrior>;

inline bool is_fixed(const ParameterPrior& p) { return std::holds_alternative<PointMass>(p); }

inline double prior_log_density(const ParameterPrior& p, double v) {
  if (const auto* pm = std::get_if<PointMass>(&p)) return v == pm->value ? 0.0 : -kInf;
  if (const auto* lu = std::get_if<LogUniform>(&p)) {
    if (!(v >= lu->lower && v <= lu->upper)) return -kInf;
    return -std::log(v) - std::log(std::log(lu->upper / lu->lower));
  }
  return log_density(std::get<Distribution>(p), v);
}

inline double prior_draw(const ParameterPrior& p, SampleRng& rng) {
  if (const auto* pm = std::get_if<PointMass>(&p)) return pm->value;
  if (const auto* lu = std::get_if<LogUniform>(&p)) {
    return std::exp(rng.uniform(std::log(lu->lower), std::log(lu->upper)));
  }
  return draw(std::get<Distribution>(p), rng);
}

inline void validate_prior(Family f, const FamilyPrior& prior) {
  detail::require(prior.size() == family_info(f).param_count,
                  family_name(f) + " prior needs one entry per parameter");
  for (const auto& p : prior) {
    if (const auto* lu = std::get_if<LogUniform>(&p)) {
      detail::require(lu->lower > 0.0 && lu->upper > lu->lower && std::isfinite(lu->upper),
                      "log-uniform prior needs 0 < lower < upper < inf");
    }
  }
}

/// Bounded priors from the data: location parameters uniform on
/// [min - 3 range, max + 3 range]; positive parameters log-uniform on
/// [1e-3 s, 1e3 s] around a moment-based scale s. Uniform bounds are
/// uniform below the data minimum and above the data maximum.
inline FamilyPrior default_prior(Family f, const Dataset& data) {
  const double lo = data.min();
  const double hi = data.max();
  const double range = hi - lo;
  detail::require(range > 0.0, "default priors need data with positive range");
  const double m = mean(data.values());
  const double sd = std::sqrt(sample_variance(data.values()));
  auto log_uniform = [](double s) { return ParameterPrior(LogUniform{1e-3 * s, 1e3 * s}); };
  auto location = [](double a, double b, double r) {
    return ParameterPrior(Distribution::uniform(a - 3.0 * r, b + 3.0 * r));
  };
  switch (f) {
    case Family::normal:
      return {location(lo, hi, range), log_uniform(sd)};
    case Family::lognormal: {
      detail::require(lo > 0.0, "Lognormal prior needs positive data");
      std::vector<double> logs(data.size());
      for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(data.values()[i]);
      const double llo = std::log(lo);
      const double lhi = std::log(hi);
      return {location(llo, lhi, lhi - llo), log_uniform(std::sqrt(sample_variance(logs)))};
    }
    case Family::gamma: {
      detail::require(lo > 0.0, "Gamma prior needs positive data");
      const double var = sd * sd;
      return {log_uniform(m * m / var), log_uniform(var / m)};
    }
    case Family::weibull:
      detail::require(lo > 0.0, "Weibull prior needs positive data");
      return {log_uniform(std::pow(sd / m, -1.086)), log_uniform(m)};
    case Family::uniform:
      return {ParameterPrior(Distribution::uniform(lo - 3.0 * range, lo)),
              ParameterPrior(Distribution::uniform(hi, hi + 3.0 * range))};
  }
  throw invalid_argument("unknown family");
}

namespace detail {

/// log L(theta | data), -inf for invalid parameters.
inline double family_log_likelihood(Family f, std::span<const double> theta, const Dataset& data) {
  if (!valid_params(f, theta)) return -kInf;
  return log_likelihood(Distribution(f, theta), data);
}

inline double log_prior(const FamilyPrior& prior, std::span<const double> theta) {
  double lp = 0.0;
  for (std::size_t k = 0; k < prior.size(); ++k) lp += prior_log_density(prior[k], theta[k]);
  return lp;
}

}  // namespace detail

// ---------------------------------------------------------------- evidence

struct EvidenceEstimate {
  double log_evidence = -kInf;
  /// Standard error of the evidence relative to the evidence, i.e. the
  /// delta-method standard error of log_evidence.
  double log_std_error = 0.0;
  /// Standard error of the evidence itself (may underflow to 0).
  double std_error = 0.0;
  std::size_t n = 0;
  std::vector<std::string> flags;
};

/// Prior-sampling Monte Carlo: evidence = mean over prior draws of L(theta),
/// accumulated in log space.
inline EvidenceEstimate model_evidence(Family f, const Dataset& data, const FamilyPrior& prior, std::size_t n_ev,
                                       const RngStream& rng) {
  validate_prior(f, prior);
  detail::require(n_ev >= 1000, "evidence estimation needs at least 1000 prior draws");
  EvidenceEstimate ev;
  ev.n = n_ev;
  if (!family_supports(f, data)) {
    ev.flags.push_back("data_outside_support:" + family_name(f));
    return ev;
  }
  const std::size_t K = prior.size();
  std::vector<double> ll(n_ev);
  for (std::size_t s = 0; s < n_ev; ++s) {
    auto g = rng.at(s);
    std::array<double, kMaxParams> theta{};
    for (std::size_t k = 0; k < K; ++k) theta[k] = prior_draw(prior[k], g);
    ll[s] = detail::family_log_likelihood(f, {theta.data(), K}, data);
  }
  const double m = *std::max_element(ll.begin(), ll.end());
  if (m == -kInf) {
    throw estimator_error("every prior draw for " + family_name(f) + " has zero likelihood");
  }
  std::vector<double> w(n_ev);
  for (std::size_t s = 0; s < n_ev; ++s) w[s] = ll[s] == -kInf ? 0.0 : std::exp(ll[s] - m);
  const double wbar = mean(w);
  const double wse = std::sqrt(sample_variance(w) / static_cast<double>(n_ev));
  ev.log_evidence = m + std::log(wbar);
  ev.log_std_error = wse / wbar;
  ev.std_error = std::exp(m) * wse;
  return ev;
}

struct BayesCandidate {
  Family family;
  FamilyPrior prior;
};

/// Posterior model probabilities from evidences and model priors. Candidate
/// j draws its evidence sample from the evidence substream offset by j.
inline ModelProbabilities bayes_weights(const std::vector<BayesCandidate>& candidates, const Dataset& data,
                                        const std::vector<double>& model_prior, std::size_t n_ev,
                                        const RngStream& rng) {
  detail::require(!candidates.empty(), "need at least one candidate family");
  detail::require(model_prior.size() == candidates.size(), "one model prior per candidate");
  ModelProbabilities mp;
  mp.method = InferenceMethod::bayes;
  const RngStream base = rng.substream(stream_tag::evidence);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    mp.families.push_back(candidates[j].family);
    const auto ev = model_evidence(candidates[j].family, data, candidates[j].prior, n_ev, base.with_offset(j));
    mp.score.push_back(ev.log_evidence);
    mp.score_se.push_back(ev.log_std_error);
    mp.flags.insert(mp.flags.end(), ev.flags.begin(), ev.flags.end());
    std::optional<Distribution> fit;
    if (ev.log_evidence > -kInf) {
      try {
        fit = mle_fit(candidates[j].family, data).distribution;
      } catch (const std::exception&) {
      }
    }
    mp.mle.push_back(fit);
  }
  mp.pi = bayes_probabilities(mp.score, model_prior);
  return mp;
}

// ---------------------------------------------------------------- MCMC

struct McmcOptions {
  std::size_t burn_in = 5000;
  std::size_t keep = 2000;
  std::size_t thin = 5;
  /// Iterations per proposal-scale adaptation batch during burn-in.
  std::size_t adapt_batch = 50;
  double target_acceptance = 0.35;
};

/// Thinned post-burn-in draws of one family's parameters.
struct ParameterPosterior {
  Family family = Family::normal;
  std::vector<Distribution> samples;
  /// Fraction of accepted proposals after burn-in (over free coordinates).
  double acceptance_rate = 0.0;
  std::size_t chain_length = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::vector<double> proposal_scale;
  std::vector<std::string> flags;

  /// Parameter k of every stored sample.
  std::vector<double> trace(std::size_t k) const {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& d : samples) v.push_back(d.param(k));
    return v;
  }

  /// Every `stride`-th sample so that at most `cap` remain.
  ParameterPosterior thinned(std::size_t cap) const {
    detail::require(cap >= 1, "thinning cap must be positive");
    if (samples.size() <= cap) return *this;
    ParameterPosterior out = *this;
    const std::size_t stride = (samples.size() + cap - 1) / cap;
    out.samples.clear();
    for (std::size_t i = 0; i < samples.size(); i += stride) out.samples.push_back(samples[i]);
    return out;
  }
};

/// Component-wise random-walk Metropolis on the log posterior. Positive
/// parameters with log-uniform priors move on the log scale (Jacobian
/// included); point-mass parameters stay fixed. Proposal scales adapt in
/// batches during burn-in and are frozen afterwards. Iteration t uses rng.at(t).
inline ParameterPosterior posterior_sample(Family f, const Dataset& data, const FamilyPrior& prior,
                                           const McmcOptions& opts, const RngStream& rng) {
  validate_prior(f, prior);
  detail::require(opts.keep >= 1 && opts.thin >= 1 && opts.adapt_batch >= 1, "keep, thin and batch must be positive");
  detail::require(family_supports(f, data), "data lie outside the support of " + family_name(f));
  const std::size_t K = prior.size();
  const std::size_t n = data.size();

  std::vector<bool> on_log(K, false), free(K, false);
  for (std::size_t k = 0; k < K; ++k) {
    free[k] = !is_fixed(prior[k]);
    on_log[k] = std::holds_alternative<LogUniform>(prior[k]) ||
                (family_info(f).positive[k] && std::holds_alternative<Distribution>(prior[k]) &&
                 std::get<Distribution>(prior[k]).support().first >= 0.0);
  }
  auto to_theta = [&](const std::array<double, kMaxParams>& u) {
    std::array<double, kMaxParams> t{};
    for (std::size_t k = 0; k < K; ++k) t[k] = on_log[k] ? std::exp(u[k]) : u[k];
    return t;
  };
  auto log_target = [&](const std::array<double, kMaxParams>& u) {
    const auto t = to_theta(u);
    const std::span<const double> th(t.data(), K);
    double lp = detail::log_prior(prior, th);
    if (lp == -kInf) return -kInf;
    lp += detail::family_log_likelihood(f, th, data);
    for (std::size_t k = 0; k < K; ++k)
      if (on_log[k] && free[k]) lp += u[k];
    return lp;
  };

  // Start at the MLE with fixed parameters pinned; fall back to prior draws.
  std::array<double, kMaxParams> theta0{};
  try {
    const auto fit = mle_fit(f, data).distribution;
    for (std::size_t k = 0; k < K; ++k) theta0[k] = fit.param(k);
  } catch (const std::exception&) {
    for (std::size_t k = 0; k < K; ++k) theta0[k] = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t k = 0; k < K; ++k)
    if (!free[k]) theta0[k] = std::get<PointMass>(prior[k]).value;
  auto to_u = [&](const std::array<double, kMaxParams>& t) {
    std::array<double, kMaxParams> u{};
    for (std::size_t k = 0; k < K; ++k) u[k] = on_log[k] ? std::log(t[k]) : t[k];
    return u;
  };
  std::array<double, kMaxParams> u = to_u(theta0);
  double cur = log_target(u);
  if (!std::isfinite(cur)) {
    const RngStream start = rng.substream(stream_tag::proposal);
    for (std::size_t tries = 0; tries < 10000 && !std::isfinite(cur); ++tries) {
      auto g = start.at(tries);
      std::array<double, kMaxParams> t{};
      for (std::size_t k = 0; k < K; ++k) t[k] = prior_draw(prior[k], g);
      u = to_u(t);
      cur = log_target(u);
    }
    if (!std::isfinite(cur)) throw numeric_error("no starting point with finite posterior density for " + family_name(f));
  }

  // Initial proposal scales from the curvature scale of each coordinate.
  double spread = std::sqrt(sample_variance(data.values()));
  if (f == Family::lognormal) {
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(data.values()[i]);
    spread = std::sqrt(sample_variance(logs));
  }
  std::vector<double> scale(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    if (!free[k]) continue;
    if (on_log[k]) scale[k] = 2.4 / std::sqrt(2.0 * static_cast<double>(n));
    else if (f == Family::uniform) scale[k] = (data.max() - data.min()) / static_cast<double>(n);
    else scale[k] = 2.4 * spread / std::sqrt(static_cast<double>(n));
    if (!(scale[k] > 0.0) || !std::isfinite(scale[k])) scale[k] = 0.1;
  }

  ParameterPosterior post;
  post.family = f;
  post.burn_in = opts.burn_in;
  post.thin = opts.thin;
  post.chain_length = opts.burn_in + opts.keep * opts.thin;
  std::vector<std::size_t> batch_acc(K, 0), batch_prop(K, 0);
  std::size_t acc = 0, prop = 0, batches = 0;
  for (std::size_t it = 0; it < post.chain_length; ++it) {
    auto g = rng.at(it);
    const bool burning = it < opts.burn_in;
    for (std::size_t k = 0; k < K; ++k) {
      if (!free[k]) continue;
      auto cand = u;
      cand[k] += scale[k] * g.normal();
      const double next = log_target(cand);
      const bool ok = next > -kInf && std::log(g.uniform()) < next - cur;
      if (ok) {
        u = cand;
        cur = next;
      }
      if (burning) {
        batch_acc[k] += ok;
        ++batch_prop[k];
      } else {
        acc += ok;
        ++prop;
      }
    }
    if (burning && (it + 1) % opts.adapt_batch == 0) {
      ++batches;
      const double step = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batches)));
      for (std::size_t k = 0; k < K; ++k) {
        if (!free[k] || batch_prop[k] == 0) continue;
        const double rate = static_cast<double>(batch_acc[k]) / static_cast<double>(batch_prop[k]);
        scale[k] *= std::exp(rate > opts.target_acceptance ? step : -step);
        batch_acc[k] = batch_prop[k] = 0;
      }
    }
    if (!burning && (it - opts.burn_in + 1) % opts.thin == 0) {
      const auto t = to_theta(u);
      post.samples.emplace_back(f, std::span<const double>(t.data(), K));
    }
  }
  post.proposal_scale = scale;
  if (prop == 0) {
    post.acceptance_rate = 1.0;
    post.flags.push_back("no_free_parameters");
    return post;
  }
  post.acceptance_rate = static_cast<double>(acc) / static_cast<double>(prop);
  if (acc == 0) throw numeric_error("MCMC chain for " + family_name(f) + " never accepted a proposal");
  if (post.acceptance_rate < 0.05 || post.acceptance_rate > 0.95) {
    post.flags.push_back("acceptance_rate_out_of_range");
  }
  return post;
}

inline void to_json(nlohmann::json& j, const ModelProbabilities& mp) {
  j = nlohmann::json::object();
  j["method"] = inference_name(mp.method);
  nlohmann::json fams = nlohmann::json::array();
  for (std::size_t i = 0; i < mp.families.size(); ++i) {
    nlohmann::json e{{"family", family_name(mp.families[i])}, {"probability", mp.pi[i]}};
    const double s = mp.score[i];
    const char* key = mp.method == InferenceMethod::aic ? "delta_aic" : "log_evidence";
    e[key] = std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr);
    if (mp.method == InferenceMethod::bayes) e["log_evidence_se"] = mp.score_se[i];
    if (mp.mle[i]) e["mle"] = *mp.mle[i];
    fams.push_back(e);
  }
  j["families"] = fams;
  j["flags"] = mp.flags;
}

inline nlohmann::json posterior_summary(const ParameterPosterior& p) {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t k = 0; k < family_info(p.family).param_count; ++k) {
    const auto t = p.trace(k);
    params.push_back({{"mean", mean(t)},
                      {"sd", t.size() > 1 ? std::sqrt(sample_variance(t)) : 0.0},
                      {"q05", quantile(std::span<const double>(t), 0.05)},
                      {"q95", quantile(std::span<const double>(t), 0.95)}});
  }
  return {{"family", family_name(p.family)},
          {"samples", p.samples.size()},
          {"chain_length", p.chain_length},
          {"acceptance_rate", p.acceptance_rate},
          {"params", params},
          {"flags", p.flags}};
}

}  // namespace uqmc
