#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "uqmc/errors.hpp"

namespace uqmc {

/// Gaussian 97.5% quantile used for every reported 95% confidence interval.
inline constexpr double kZ975 = 1.959963984540054;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is bit-stable for a given input vector.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double mean(std::span<const double> x) {
  detail::require(!x.empty(), "mean of empty sample");
  return pairwise_sum(x) / static_cast<double>(x.size());
}

/// Sum of squared deviations from `center`.
inline double sum_sq_dev(std::span<const double> x, double center) {
  std::vector<double> d(x.size());
  std::transform(x.begin(), x.end(), d.begin(), [center](double v) { return (v - center) * (v - center); });
  return pairwise_sum(d);
}

/// Unbiased sample variance (1/(n-1)).
inline double sample_variance(std::span<const double> x) {
  detail::require(x.size() >= 2, "sample variance needs at least 2 values");
  return sum_sq_dev(x, mean(x)) / static_cast<double>(x.size() - 1);
}

/// Biased (maximum-likelihood) sample variance (1/n).
inline double biased_variance(std::span<const double> x) {
  detail::require(!x.empty(), "variance of empty sample");
  return sum_sq_dev(x, mean(x)) / static_cast<double>(x.size());
}

inline double sample_covariance(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "covariance needs two equal-length samples");
  const double mx = mean(x);
  const double my = mean(y);
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = (x[i] - mx) * (y[i] - my);
  return pairwise_sum(p) / static_cast<double>(x.size() - 1);
}

/// Pearson correlation; returns NaN when either sample is constant.
inline double correlation(std::span<const double> x, std::span<const double> y) {
  const double vx = sample_variance(x);
  const double vy = sample_variance(y);
  if (vx <= 0.0 || vy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double r = sample_covariance(x, y) / std::sqrt(vx * vy);
  return std::clamp(r, -1.0, 1.0);
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
inline double quantile(std::span<const double> x, double p) {
  detail::require(!x.empty(), "quantile of empty sample");
  detail::require(p >= 0.0 && p <= 1.0, "quantile level outside [0,1]");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

/// Kish effective sample size (sum w)^2 / sum w^2 of importance weights.
inline double weights_ess(std::span<const double> w) {
  std::vector<double> w2(w.size());
  std::transform(w.begin(), w.end(), w2.begin(), [](double v) { return v * v; });
  const double s = pairwise_sum(w);
  const double s2 = pairwise_sum(w2);
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

/// Effective sample size of a Markov chain using Geyer's initial positive
/// sequence estimator of the integrated autocorrelation time.
inline double chain_ess(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean(chain);
  const double c0 = sum_sq_dev(chain, m) / static_cast<double>(n);
  if (c0 <= 0.0) return static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (chain[i] - m) * (chain[i + lag] - m);
    return s / static_cast<double>(n);
  };
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -kInf;
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  std::vector<double> e(x.size());
  std::transform(x.begin(), x.end(), e.begin(), [m](double v) { return std::exp(v - m); });
  return m + std::log(pairwise_sum(e));
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15/31) quadrature on [a, b]; either bound may be
/// infinite. Throws numeric_error when the error estimate misses `tol`
/// (relative to max(1, |value|)).
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double tol = 1e-8, unsigned max_depth = 20) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, max_depth, tol * 1e-2, &err);
  if (!std::isfinite(v) || err > tol * std::max(1.0, std::abs(v))) {
    throw numeric_error("quadrature did not converge on [" + std::to_string(a) + ", " +
                        std::to_string(b) + "]: error estimate " + std::to_string(err));
  }
  return {v, err};
}

/// integrate() over [a, b] split at the given interior break points.
template <class F>
QuadratureResult integrate_pieces(F&& f, double a, double b, std::vector<double> breaks,
                                  double tol = 1e-8) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i] < a || breaks[i + 1] > b) continue;
    const auto piece = integrate(f, breaks[i], breaks[i + 1], tol);
    total.value += piece.value;
    total.error += piece.error;
  }
  return total;
}

}  // namespace uqmc
