#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <nlohmann/json.hpp>

#include "uqmc/errors.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

/// Parametric families. Gamma and Weibull use (shape, scale); Normal and
/// Lognormal use (location, scale) where Lognormal's are those of log X;
/// Uniform uses (lower, upper).
enum class Family { normal, lognormal, gamma, weibull, uniform };

inline constexpr std::array kAllFamilies = {Family::normal, Family::lognormal, Family::gamma,
                                            Family::weibull, Family::uniform};

inline constexpr std::size_t kMaxParams = 2;

struct FamilyInfo {
  std::string_view name;
  std::size_t param_count;
  /// Open lower bound of the support for the positive families, -inf otherwise.
  double support_lower;
  /// Which parameters must be strictly positive.
  std::array<bool, kMaxParams> positive;
};

constexpr FamilyInfo family_info(Family f) {
  switch (f) {
    case Family::normal:
      return {"Normal", 2, -kInf, {false, true}};
    case Family::lognormal:
      return {"Lognormal", 2, 0.0, {false, true}};
    case Family::gamma:
      return {"Gamma", 2, 0.0, {true, true}};
    case Family::weibull:
      return {"Weibull", 2, 0.0, {true, true}};
    case Family::uniform:
      return {"Uniform", 2, -kInf, {false, false}};
  }
  return {"?", 0, 0.0, {false, false}};
}

inline std::string family_name(Family f) { return std::string(family_info(f).name); }

inline Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Family f : kAllFamilies) {
    std::string candidate(family_info(f).name);
    std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (candidate == lower) return f;
  }
  throw invalid_argument("unknown distribution family '" + std::string(name) + "'");
}

/// True when `params` are admissible for `family` (finite, positive where
/// required, lower < upper for Uniform).
inline bool valid_params(Family family, std::span<const double> params) {
  const auto info = family_info(family);
  if (params.size() != info.param_count) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(params[i])) return false;
    if (info.positive[i] && !(params[i] > 0.0)) return false;
  }
  if (family == Family::uniform && !(params[0] < params[1])) return false;
  return true;
}

/// An immutable, validated member of one of the parametric families.
class Distribution {
 public:
  Distribution(Family family, std::span<const double> params) : family_(family) {
    if (!valid_params(family, params)) {
      std::string msg = "invalid parameters for " + family_name(family) + ":";
      for (double p : params) msg += " " + std::to_string(p);
      throw invalid_argument(msg);
    }
    std::copy(params.begin(), params.end(), params_.begin());
  }
  Distribution(Family family, std::initializer_list<double> params)
      : Distribution(family, std::span<const double>(params.begin(), params.size())) {}

  static Distribution normal(double mu, double sigma) { return {Family::normal, {mu, sigma}}; }
  static Distribution lognormal(double mu, double sigma) { return {Family::lognormal, {mu, sigma}}; }
  static Distribution gamma(double shape, double scale) { return {Family::gamma, {shape, scale}}; }
  static Distribution weibull(double shape, double scale) { return {Family::weibull, {shape, scale}}; }
  static Distribution uniform(double lower, double upper) { return {Family::uniform, {lower, upper}}; }

  Family family() const { return family_; }
  std::span<const double> params() const { return {params_.data(), family_info(family_).param_count}; }
  double param(std::size_t i) const { return params_[i]; }

  /// Closed support interval [lower, upper] (bounds may be infinite).
  std::pair<double, double> support() const {
    if (family_ == Family::uniform) return {params_[0], params_[1]};
    return {family_info(family_).support_lower, kInf};
  }

  double mean() const {
    const double a = params_[0];
    const double b = params_[1];
    switch (family_) {
      case Family::normal:
        return a;
      case Family::lognormal:
        return std::exp(a + 0.5 * b * b);
      case Family::gamma:
        return a * b;
      case Family::weibull:
        return b * std::tgamma(1.0 + 1.0 / a);
      case Family::uniform:
        return 0.5 * (a + b);
    }
    return 0.0;
  }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  Family family_;
  std::array<double, kMaxParams> params_{};
};

inline double log_density(const Distribution& d, double x) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const double a = d.param(0);
  const double b = d.param(1);
  switch (d.family()) {
    case Family::normal: {
      const double z = (x - a) / b;
      return -kHalfLog2Pi - std::log(b) - 0.5 * z * z;
    }
    case Family::lognormal: {
      if (!(x > 0.0)) return -kInf;
      const double lx = std::log(x);
      const double z = (lx - a) / b;
      return -kHalfLog2Pi - std::log(b) - lx - 0.5 * z * z;
    }
    case Family::gamma: {
      if (!(x > 0.0)) return -kInf;
      return (a - 1.0) * std::log(x) - x / b - std::lgamma(a) - a * std::log(b);
    }
    case Family::weibull: {
      if (!(x > 0.0)) return -kInf;
      const double lz = std::log(x / b);
      return std::log(a) - std::log(b) + (a - 1.0) * lz - std::exp(a * lz);
    }
    case Family::uniform:
      return (x >= a && x <= b) ? -std::log(b - a) : -kInf;
  }
  return -kInf;
}

/// pdf(x), or log pdf(x) when log_scale is set. Zero (-inf) outside the support.
inline double density(const Distribution& d, double x, bool log_scale = false) {
  const double lp = log_density(d, x);
  return log_scale ? lp : std::exp(lp);
}

inline double cdf(const Distribution& d, double x) {
  const double a = d.param(0);
  const double b = d.param(1);
  switch (d.family()) {
    case Family::normal:
      return 0.5 * std::erfc(-(x - a) / (b * std::numbers::sqrt2));
    case Family::lognormal:
      return x <= 0.0 ? 0.0 : 0.5 * std::erfc(-(std::log(x) - a) / (b * std::numbers::sqrt2));
    case Family::gamma:
      return x <= 0.0 ? 0.0 : boost::math::gamma_p(a, x / b);
    case Family::weibull:
      return x <= 0.0 ? 0.0 : -std::expm1(-std::pow(x / b, a));
    case Family::uniform:
      return std::clamp((x - a) / (b - a), 0.0, 1.0);
  }
  return 0.0;
}

inline double quantile(const Distribution& d, double p) {
  detail::require(p > 0.0 && p < 1.0, "quantile level must lie in (0,1)");
  const double a = d.param(0);
  const double b = d.param(1);
  switch (d.family()) {
    case Family::normal:
      return a - b * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
    case Family::lognormal:
      return std::exp(a - b * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p));
    case Family::gamma:
      return b * boost::math::gamma_p_inv(a, p);
    case Family::weibull:
      return b * std::pow(-std::log1p(-p), 1.0 / a);
    case Family::uniform:
      return a + p * (b - a);
  }
  return 0.0;
}

/// One draw; consumes a variable number of uniforms from `rng`.
inline double draw(const Distribution& d, SampleRng& rng) {
  const double a = d.param(0);
  const double b = d.param(1);
  switch (d.family()) {
    case Family::normal:
      return a + b * rng.normal();
    case Family::lognormal:
      return std::exp(a + b * rng.normal());
    case Family::gamma: {
      // Marsaglia-Tsang; shape < 1 boosted through Gamma(shape + 1) * U^(1/shape).
      const double shape = a < 1.0 ? a + 1.0 : a;
      const double dd = shape - 1.0 / 3.0;
      const double c = 1.0 / std::sqrt(9.0 * dd);
      double x = 0.0;
      for (;;) {
        const double z = rng.normal();
        const double v0 = 1.0 + c * z;
        if (v0 <= 0.0) continue;
        const double v = v0 * v0 * v0;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * z * z + dd - dd * v + dd * std::log(v)) {
          x = dd * v;
          break;
        }
      }
      if (a < 1.0) x *= std::pow(rng.uniform(), 1.0 / a);
      return b * x;
    }
    case Family::weibull:
      return b * std::pow(-std::log(rng.uniform()), 1.0 / a);
    case Family::uniform:
      return rng.uniform(a, b);
  }
  return 0.0;
}

/// n i.i.d. draws; draw i comes from rng.at(i).
inline std::vector<double> sample(const Distribution& d, const RngStream& rng, std::size_t n) {
  detail::require(n >= 1, "sample size must be at least 1");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = rng.at(i);
    out[i] = draw(d, r);
  }
  return out;
}

/// Observed data for inference: nonempty, finite.
class Dataset {
 public:
  explicit Dataset(std::vector<double> values) : values_(std::move(values)) {
    detail::require(!values_.empty(), "dataset must contain at least one value");
    for (double v : values_) detail::require(std::isfinite(v), "dataset contains a non-finite value");
  }

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

 private:
  std::vector<double> values_;
};

/// True when every datum lies in the family's support (Uniform always
/// qualifies since its bounds are fitted).
inline bool family_supports(Family family, const Dataset& data) {
  const double lower = family_info(family).support_lower;
  return std::all_of(data.values().begin(), data.values().end(), [lower](double v) {
    return std::isinf(lower) || v > lower;
  });
}

/// Sum of log densities; -inf if any datum falls outside the support.
inline double log_likelihood(const Distribution& d, const Dataset& data) {
  std::vector<double> lp(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    lp[i] = log_density(d, data.values()[i]);
    if (lp[i] == -kInf) return -kInf;
  }
  return pairwise_sum(lp);
}

struct MleFit {
  Distribution distribution;
  double log_likelihood;
  int iterations = 0;
};

namespace detail {

inline void check_fit_data(Family family, const Dataset& data) {
  require(data.size() >= 2, "maximum likelihood fit needs at least 2 data points");
  if (!family_supports(family, data)) {
    throw invalid_argument("data outside the support of " + family_name(family));
  }
  if (data.min() == data.max()) {
    throw invalid_argument("degenerate data: all values equal, " + family_name(family) +
                           " MLE has zero scale");
  }
}

inline std::vector<double> logs(const Dataset& data) {
  std::vector<double> l(data.size());
  std::transform(data.values().begin(), data.values().end(), l.begin(), [](double v) { return std::log(v); });
  return l;
}

inline constexpr int kMaxNewton = 100;
inline constexpr double kNewtonTol = 1e-10;

/// Shape k of the Gamma MLE: root of log k - digamma(k) = log(mean) - mean(log x).
inline std::pair<double, int> gamma_shape_mle(const Dataset& data) {
  const double m = mean(data.values());
  const auto lx = logs(data);
  const double s = std::log(m) - mean(lx);
  double k = m * m / biased_variance(data.values());  // method of moments
  for (int it = 1; it <= kMaxNewton; ++it) {
    const double f = std::log(k) - boost::math::digamma(k) - s;
    if (std::abs(f) < kNewtonTol) return {k, it};
    const double fp = 1.0 / k - boost::math::trigamma(k);
    double next = k - f / fp;
    if (!(next > 0.0)) next = 0.5 * k;
    k = next;
  }
  throw numeric_error("Gamma MLE: Newton iteration did not converge in 100 steps");
}

/// Shape k of the Weibull MLE: root of
///   sum x^k log x / sum x^k - 1/k - mean(log x) = 0,
/// with the x^k weights evaluated in log space.
inline std::pair<double, int> weibull_shape_mle(const Dataset& data) {
  const auto lx = logs(data);
  const double mean_log = mean(lx);
  const double cv = std::sqrt(biased_variance(data.values())) / mean(data.values());
  double k = std::pow(cv, -1.086);  // moment-based start
  std::vector<double> w(lx.size());
  for (int it = 1; it <= kMaxNewton; ++it) {
    const double top = k * *std::max_element(lx.begin(), lx.end());
    for (std::size_t i = 0; i < lx.size(); ++i) w[i] = std::exp(k * lx[i] - top);
    const double sw = pairwise_sum(w);
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      a += w[i] * lx[i];
      b += w[i] * lx[i] * lx[i];
    }
    a /= sw;
    b /= sw;
    const double g = a - 1.0 / k - mean_log;
    if (std::abs(g) < kNewtonTol) return {k, it};
    const double gp = (b - a * a) + 1.0 / (k * k);
    double next = k - g / gp;
    if (!(next > 0.0)) next = 0.5 * k;
    k = next;
  }
  throw numeric_error("Weibull MLE: Newton iteration did not converge in 100 steps");
}

}  // namespace detail

/// Maximum likelihood fit. Closed form for Normal, Lognormal and Uniform
/// (scale uses the 1/n convention); Newton on the profile likelihood of the
/// shape for Gamma and Weibull, started from moment estimates.
inline MleFit mle_fit(Family family, const Dataset& data) {
  detail::check_fit_data(family, data);
  const auto x = data.values();
  int iterations = 0;
  std::array<double, 2> theta{};
  switch (family) {
    case Family::normal:
      theta = {mean(x), std::sqrt(biased_variance(x))};
      break;
    case Family::lognormal: {
      const auto lx = detail::logs(data);
      theta = {mean(lx), std::sqrt(biased_variance(lx))};
      break;
    }
    case Family::gamma: {
      const auto [k, it] = detail::gamma_shape_mle(data);
      theta = {k, mean(x) / k};
      iterations = it;
      break;
    }
    case Family::weibull: {
      const auto [k, it] = detail::weibull_shape_mle(data);
      const auto lx = detail::logs(data);
      std::vector<double> klx(lx.size());
      std::transform(lx.begin(), lx.end(), klx.begin(), [k = k](double v) { return k * v; });
      const double log_scale = (log_sum_exp(klx) - std::log(static_cast<double>(lx.size()))) / k;
      theta = {k, std::exp(log_scale)};
      iterations = it;
      break;
    }
    case Family::uniform:
      theta = {data.min(), data.max()};
      break;
  }
  Distribution dist(family, theta);
  return {dist, log_likelihood(dist, data), iterations};
}

inline void to_json(nlohmann::json& j, const Distribution& d) {
  j = nlohmann::json{{"family", family_name(d.family())},
                     {"params", std::vector<double>(d.params().begin(), d.params().end())}};
}

inline Distribution distribution_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j.contains("params")) {
    throw invalid_argument("distribution must be an object with 'family' and 'params'");
  }
  const auto params = j.at("params").get<std::vector<double>>();
  return Distribution(parse_family(j.at("family").get<std::string>()), params);
}

}  // namespace uqmc
