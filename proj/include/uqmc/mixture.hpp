#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/inference.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

using PosteriorMap = std::map<Family, ParameterPosterior>;

/// T (family, theta) pairs drawn from the family probabilities and the
/// stored posterior samples.
struct CandidateModelSet {
  std::vector<Distribution> entries;
  std::vector<Family> families;
  std::vector<double> pi;
  std::uint64_t seed = 0;

  std::size_t size() const { return entries.size(); }
};

/// Entry t uses rng.at(t): family by categorical(pi), then one stored
/// posterior sample uniformly with replacement.
inline CandidateModelSet build_candidate_set(const ModelProbabilities& mp, const PosteriorMap& posteriors,
                                             std::size_t T, const RngStream& rng) {
  detail::require(T >= 1, "ensemble size must be at least 1");
  for (std::size_t j = 0; j < mp.families.size(); ++j) {
    if (mp.pi[j] <= 0.0) continue;
    const auto it = posteriors.find(mp.families[j]);
    detail::require(it != posteriors.end() && !it->second.samples.empty(),
                    "no posterior samples for " + family_name(mp.families[j]) + " which has positive probability");
  }
  CandidateModelSet set;
  set.families = mp.families;
  set.pi = mp.pi;
  set.seed = rng.seed;
  std::vector<double> cum(mp.pi.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < cum.size(); ++j) cum[j] = (acc += mp.pi[j]);
  for (std::size_t t = 0; t < T; ++t) {
    auto g = rng.at(t);
    const double u = g.uniform() * acc;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const auto j = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
    const auto& samples = posteriors.at(mp.families[j]).samples;
    set.entries.push_back(samples[g.below(samples.size())]);
  }
  return set;
}

/// Finite mixture sum_c w_c p_c(x).
class MixtureDensity {
 public:
  MixtureDensity(std::vector<double> weights, std::vector<Distribution> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    detail::require(!components_.empty() && weights_.size() == components_.size(),
                    "mixture needs one weight per component");
    double s = 0.0;
    for (double w : weights_) {
      detail::require(w >= 0.0 && std::isfinite(w), "mixture weights must be non-negative");
      s += w;
    }
    detail::require(s > 0.0, "mixture weights sum to zero");
    const double total = pairwise_sum(weights_);
    if (std::abs(total - 1.0) > 1e-12) {
      for (double& w : weights_) w /= total;
    }
    cumulative_.resize(weights_.size());
    double c = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) cumulative_[i] = (c += weights_[i]);
  }

  explicit MixtureDensity(const Distribution& d) : MixtureDensity({1.0}, {d}) {}

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Distribution>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  bool normalized() const { return std::abs(pairwise_sum(weights_) - 1.0) <= 1e-12; }

  double pdf(double x) const {
    std::vector<double> t(components_.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = weights_[i] * density(components_[i], x);
    return pairwise_sum(t);
  }

  double log_pdf(double x) const {
    std::vector<double> t(components_.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = weights_[i] > 0.0 ? std::log(weights_[i]) + log_density(components_[i], x) : -kInf;
    }
    return log_sum_exp(t);
  }

  double sample(SampleRng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), size() - 1);
    return draw(components_[i], rng);
  }

  /// Support of the mixture as sorted disjoint closed intervals.
  std::vector<std::pair<double, double>> support() const {
    std::vector<std::pair<double, double>> iv;
    for (std::size_t i = 0; i < size(); ++i)
      if (weights_[i] > 0.0) iv.push_back(components_[i].support());
    std::sort(iv.begin(), iv.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& s : iv) {
      if (!out.empty() && s.first <= out.back().second) out.back().second = std::max(out.back().second, s.second);
      else out.push_back(s);
    }
    return out;
  }

  bool covers(const Distribution& d) const {
    const auto [a, b] = d.support();
    for (const auto& [lo, hi] : support())
      if (lo <= a && b <= hi) return true;
    return false;
  }

 private:
  std::vector<double> weights_;
  std::vector<Distribution> components_;
  std::vector<double> cumulative_;
};

inline double density(const MixtureDensity& q, double x) { return q.pdf(x); }
inline double log_density(const MixtureDensity& q, double x) { return q.log_pdf(x); }
inline double draw(const MixtureDensity& q, SampleRng& rng) { return q.sample(rng); }

enum class MixtureMode { equal, weighted };

inline MixtureMode parse_mixture_mode(const std::string& s) {
  if (s == "equal") return MixtureMode::equal;
  if (s == "weighted") return MixtureMode::weighted;
  throw invalid_argument("mixture mode must be 'equal' or 'weighted', got '" + s + "'");
}

inline std::string mixture_mode_name(MixtureMode m) { return m == MixtureMode::equal ? "equal" : "weighted"; }

/// Family weights: 1/N_p over families with posteriors (equal) or their
/// probabilities (weighted).
inline std::vector<std::pair<Family, double>> mixture_family_weights(const ModelProbabilities& mp,
                                                                     const PosteriorMap& posteriors,
                                                                     MixtureMode mode) {
  std::vector<std::pair<Family, double>> out;
  for (std::size_t j = 0; j < mp.families.size(); ++j) {
    const auto it = posteriors.find(mp.families[j]);
    const bool has = it != posteriors.end() && !it->second.samples.empty();
    if (mode == MixtureMode::weighted) {
      if (mp.pi[j] <= 0.0) continue;
      detail::require(has, "no posterior samples for " + family_name(mp.families[j]));
      out.emplace_back(mp.families[j], mp.pi[j]);
    } else if (has) {
      out.emplace_back(mp.families[j], 1.0);
    }
  }
  detail::require(!out.empty(), "no family has posterior samples");
  double s = 0.0;
  for (const auto& fw : out) s += fw.second;
  for (auto& fw : out) fw.second /= s;
  return out;
}

/// q*(x) = sum_j w_j (1/S_j) sum_s p_j(x | theta_js), with each family's
/// posterior thinned to at most `max_components_per_family` samples.
inline MixtureDensity optimal_mixture(const ModelProbabilities& mp, const PosteriorMap& posteriors,
                                      MixtureMode mode, std::size_t max_components_per_family = 500) {
  std::vector<double> w;
  std::vector<Distribution> comps;
  for (const auto& [f, wf] : mixture_family_weights(mp, posteriors, mode)) {
    const auto post = posteriors.at(f).thinned(max_components_per_family);
    const double each = wf / static_cast<double>(post.samples.size());
    for (const auto& d : post.samples) {
      w.push_back(each);
      comps.push_back(d);
    }
  }
  return MixtureDensity(std::move(w), std::move(comps));
}

/// Target densities grouped by family for the expected mean squared
/// difference: family j carries weight `weight[j]` and equally weighted members.
struct EmsdTargets {
  std::vector<std::vector<Distribution>> groups;
  std::vector<double> weight;
};

/// Each family present in the set is one group (weight 1) of its entries.
inline EmsdTargets emsd_targets(const CandidateModelSet& set) {
  EmsdTargets t;
  std::map<Family, std::size_t> slot;
  for (const auto& d : set.entries) {
    auto [it, fresh] = slot.emplace(d.family(), t.groups.size());
    if (fresh) {
      t.groups.emplace_back();
      t.weight.push_back(1.0);
    }
    t.groups[it->second].push_back(d);
  }
  return t;
}

/// One group per family holding its thinned posterior samples, weighted as in
/// optimal_mixture for `mode` (times N_p for equal mode, so each family counts once).
inline EmsdTargets emsd_targets(const ModelProbabilities& mp, const PosteriorMap& posteriors, MixtureMode mode,
                                std::size_t max_components_per_family = 500) {
  EmsdTargets t;
  const auto fw = mixture_family_weights(mp, posteriors, mode);
  for (const auto& [f, w] : fw) {
    t.groups.push_back(posteriors.at(f).thinned(max_components_per_family).samples);
    t.weight.push_back(mode == MixtureMode::equal ? 1.0 : w);
  }
  return t;
}

namespace detail {

inline std::pair<double, double> effective_range(const Distribution& d) {
  if (d.family() == Family::uniform) return d.support();
  return {quantile(d, 1e-13), quantile(d, 1.0 - 1e-13)};
}

}  // namespace detail

/// x-range and break points covering every density involved.
inline std::pair<std::pair<double, double>, std::vector<double>> quadrature_layout(
    const MixtureDensity& q, const std::vector<std::vector<Distribution>>& extra = {}) {
  double lo = kInf, hi = -kInf;
  std::vector<double> breaks;
  auto take = [&](const Distribution& d) {
    const auto [a, b] = detail::effective_range(d);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
    const auto [sa, sb] = d.support();
    if (std::isfinite(sa)) breaks.push_back(sa);
    if (std::isfinite(sb)) breaks.push_back(sb);
  };
  for (const auto& d : q.components()) take(d);
  for (const auto& g : extra)
    for (const auto& d : g) take(d);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  // Keep the number of pieces bounded: many nearby uniform endpoints add cost only.
  if (breaks.size() > 64) {
    std::vector<double> sparse;
    const std::size_t stride = (breaks.size() + 63) / 64;
    for (std::size_t i = 0; i < breaks.size(); i += stride) sparse.push_back(breaks[i]);
    breaks = std::move(sparse);
  }
  return {{lo, hi}, breaks};
}

/// Integral of q over its support, by adaptive quadrature.
inline double mixture_integral(const MixtureDensity& q, double tol = 1e-10) {
  const auto [range, breaks] = quadrature_layout(q);
  return integrate_pieces([&](double x) { return q.pdf(x); }, range.first, range.second, breaks, tol).value;
}

/// sum_j weight_j (1/S_j) sum_s 1/2 integral (p_js - q)^2 dx, with one
/// quadrature over x of the integrand expanded per group.
inline double emsd(const MixtureDensity& q, const EmsdTargets& targets, double tol = 1e-8) {
  detail::require(!targets.groups.empty() && targets.groups.size() == targets.weight.size(),
                  "emsd needs at least one weighted target group");
  const auto [range, breaks] = quadrature_layout(q, targets.groups);
  auto integrand = [&](double x) {
    const double qx = q.pdf(x);
    double total = 0.0;
    for (std::size_t j = 0; j < targets.groups.size(); ++j) {
      const auto& g = targets.groups[j];
      double sq = 0.0, lin = 0.0;
      for (const auto& d : g) {
        const double p = density(d, x);
        sq += p * p;
        lin += p;
      }
      const double s = static_cast<double>(g.size());
      total += targets.weight[j] * 0.5 * (sq / s - 2.0 * qx * lin / s + qx * qx);
    }
    return total;
  };
  return integrate_pieces(integrand, range.first, range.second, breaks, tol).value;
}

inline void to_json(nlohmann::json& j, const MixtureDensity& q) {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t i = 0; i < q.size(); ++i) {
    nlohmann::json c = q.components()[i];
    c["weight"] = q.weights()[i];
    comps.push_back(c);
  }
  j = nlohmann::json{{"components", comps}, {"normalized", q.normalized()}};
}

}  // namespace uqmc
