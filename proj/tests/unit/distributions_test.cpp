#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"

using namespace uqmc;

TEST(Distribution, DensityKnownValues) {
  EXPECT_NEAR(density(Distribution::normal(0, 1), 0.0), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(density(Distribution::gamma(2, 1), 1.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(density(Distribution::weibull(2, 1), 1.0), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(density(Distribution::uniform(1, 3), 2.0), 0.5, 1e-15);
  EXPECT_NEAR(density(Distribution::lognormal(0, 1), 1.0), 0.3989422804014327, 1e-15);
}

TEST(Distribution, DensityOutsideSupport) {
  EXPECT_EQ(density(Distribution::gamma(2, 1), -1.0), 0.0);
  EXPECT_EQ(log_density(Distribution::lognormal(0, 1), 0.0), -kInf);
  EXPECT_EQ(density(Distribution::uniform(1, 3), 3.5), 0.0);
  EXPECT_EQ(log_density(Distribution::weibull(1.5, 2), -0.1), -kInf);
}

TEST(Distribution, LogDensityMatchesDensity) {
  const Distribution ds[] = {Distribution::normal(1, 2), Distribution::lognormal(0.3, 0.5),
                             Distribution::gamma(3, 0.7), Distribution::weibull(1.7, 2.2)};
  for (const auto& d : ds) {
    for (double x : {0.5, 1.0, 2.5}) EXPECT_NEAR(std::exp(log_density(d, x)), density(d, x), 1e-14);
    EXPECT_NEAR(density(d, 1.0, true), log_density(d, 1.0), 1e-15);
  }
}

TEST(Distribution, CdfQuantileRoundTrip) {
  const Distribution ds[] = {Distribution::normal(1, 2), Distribution::lognormal(0.3, 0.5),
                             Distribution::gamma(3, 0.7), Distribution::weibull(1.7, 2.2),
                             Distribution::uniform(-1, 4)};
  for (const auto& d : ds) {
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) EXPECT_NEAR(cdf(d, quantile(d, p)), p, 1e-10);
  }
  EXPECT_NEAR(cdf(Distribution::weibull(2, 1), 1.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(quantile(Distribution::normal(0, 1), 0.975), kZ975, 1e-12);
}

TEST(Distribution, DensityIntegratesToOne) {
  const Distribution ds[] = {Distribution::normal(1, 2), Distribution::lognormal(0.3, 0.5),
                             Distribution::gamma(3, 0.7), Distribution::weibull(1.7, 2.2)};
  for (const auto& d : ds) {
    const auto [lo, hi] = d.support();
    EXPECT_NEAR(integrate([&](double x) { return density(d, x); }, lo, hi).value, 1.0, 1e-8);
  }
}

TEST(Distribution, InvalidParametersRejected) {
  EXPECT_THROW(Distribution::normal(0, 0), invalid_argument);
  EXPECT_THROW(Distribution::gamma(-1, 1), invalid_argument);
  EXPECT_THROW(Distribution::weibull(1, 0), invalid_argument);
  EXPECT_THROW(Distribution::uniform(2, 1), invalid_argument);
  EXPECT_THROW(Distribution::normal(std::nan(""), 1), invalid_argument);
  EXPECT_THROW(parse_family("Gama"), invalid_argument);
  EXPECT_EQ(parse_family("Weibull"), Family::weibull);
}

TEST(Distribution, SampleMomentsMatch) {
  const Distribution ds[] = {Distribution::normal(1, 2), Distribution::lognormal(0.3, 0.5),
                             Distribution::gamma(0.6, 1.5), Distribution::gamma(3, 0.7),
                             Distribution::weibull(1.7, 2.2), Distribution::uniform(-1, 4)};
  for (const auto& d : ds) {
    const auto x = sample(d, RngStream{5, 0, 0}, 100000);
    const double se = std::sqrt(sample_variance(x) / x.size());
    EXPECT_NEAR(mean(x), d.mean(), 4.0 * se) << family_name(d.family());
  }
}

TEST(Distribution, SampleIsReproducible) {
  const auto a = sample(Distribution::gamma(2, 1), RngStream{9, 1, 0}, 100);
  const auto b = sample(Distribution::gamma(2, 1), RngStream{9, 1, 0}, 100);
  EXPECT_EQ(a, b);
}

TEST(Dataset, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(Dataset(std::vector<double>{}), invalid_argument);
  EXPECT_THROW(Dataset(std::vector<double>{1.0, std::nan("")}), invalid_argument);
}

TEST(Mle, NormalAndLognormalClosedForm) {
  const Dataset data({1.0, 2.0, 4.0, 7.0});
  const auto n = mle_fit(Family::normal, data);
  EXPECT_NEAR(n.distribution.param(0), 3.5, 1e-14);
  EXPECT_NEAR(n.distribution.param(1), std::sqrt(5.25), 1e-14);
  const auto l = mle_fit(Family::lognormal, data);
  const double ml = (std::log(2.0) + std::log(4.0) + std::log(7.0)) / 4.0;
  EXPECT_NEAR(l.distribution.param(0), ml, 1e-14);
  const auto u = mle_fit(Family::uniform, data);
  EXPECT_EQ(u.distribution.param(0), 1.0);
  EXPECT_EQ(u.distribution.param(1), 7.0);
}

TEST(Mle, GammaAndWeibullAreLocalMaxima) {
  const Dataset data({4.21, 5.87, 3.64, 6.92, 5.13, 4.78, 8.05, 5.46, 3.97, 6.31});
  for (Family f : {Family::gamma, Family::weibull}) {
    const auto fit = mle_fit(f, data);
    const double k = fit.distribution.param(0);
    const double s = fit.distribution.param(1);
    EXPECT_NEAR(fit.log_likelihood, log_likelihood(fit.distribution, data), 1e-12);
    for (double dk : {-1e-3, 1e-3})
      for (double ds : {-1e-3, 0.0, 1e-3})
        EXPECT_LT(log_likelihood(Distribution(f, {k * (1 + dk), s * (1 + ds)}), data), fit.log_likelihood);
  }
}

TEST(Mle, GammaRecoversParameters) {
  const Dataset data(sample(Distribution::gamma(2.5, 1.3), RngStream{11, 0, 0}, 20000));
  const auto fit = mle_fit(Family::gamma, data).distribution;
  EXPECT_NEAR(fit.param(0), 2.5, 0.1);
  EXPECT_NEAR(fit.param(1), 1.3, 0.06);
}

TEST(Mle, UnsupportedDataRejected) {
  const Dataset data({-1.0, 2.0, 3.0});
  EXPECT_FALSE(family_supports(Family::gamma, data));
  EXPECT_TRUE(family_supports(Family::normal, data));
  EXPECT_THROW(mle_fit(Family::lognormal, data), invalid_argument);
  EXPECT_THROW(mle_fit(Family::normal, Dataset({2.0, 2.0})), invalid_argument);
}

TEST(Distribution, JsonRoundTrip) {
  const auto d = Distribution::weibull(1.5, 3.0);
  nlohmann::json j = d;
  EXPECT_EQ(j["family"], "Weibull");
  EXPECT_EQ(distribution_from_json(j), d);
}

TEST(Distribution, NormalizationOverParameterGrid) {
  for (double a : {0.5, 1.0, 3.0, 8.0}) {
    for (double b : {0.3, 1.0, 4.0}) {
      for (const auto& d : {Distribution::normal(a, b), Distribution::lognormal(std::log(a), b),
                            Distribution::gamma(a, b), Distribution::weibull(a, b),
                            Distribution::uniform(-a, b)}) {
        const auto [lo, hi] = d.support();
        // Pieces between quantiles; tanh-sinh on the leftmost piece (a pole at 0
        // for shape < 1) and the right tail in log space, x = q e^t.
        std::vector<double> breaks;
        for (double p : {1e-3, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999}) breaks.push_back(quantile(d, p));
        const auto f = [&](double x) { return density(d, x); };
        const double first = breaks.front();
        const double last = breaks.back();
        const double left = std::isfinite(lo) ? boost::math::quadrature::tanh_sinh<double>().integrate(f, lo, first)
                                              : integrate(f, lo, first, 1e-7).value;
        const double right =
            std::isfinite(hi) ? integrate(f, last, hi, 1e-7).value
                              : integrate(
                                    [&](double t) {
                                      const double x = last * std::exp(t);
                                      return std::isfinite(x) ? f(x) * x : 0.0;
                                    },
                                    0.0, kInf, 1e-7)
                                    .value;
        const double v = left + integrate_pieces(f, first, last, breaks, 1e-7).value + right;
        EXPECT_NEAR(v, 1.0, 1e-6) << family_name(d.family()) << " " << a << " " << b;
      }
    }
  }
}

TEST(Distribution, KolmogorovSmirnovAgainstCdf) {
  const std::size_t n = 100000;
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));  // 1% level
  const Distribution ds[] = {Distribution::normal(1, 2),   Distribution::lognormal(0.3, 0.5),
                             Distribution::gamma(0.6, 1.5), Distribution::gamma(3, 0.7),
                             Distribution::weibull(1.7, 2.2), Distribution::uniform(-1, 4)};
  for (const auto& d : ds) {
    auto x = sample(d, RngStream{13, 0, 0}, n);
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double F = cdf(d, x[i]);
      ks = std::max({ks, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    EXPECT_LT(ks, critical) << family_name(d.family());
  }
}

TEST(Distribution, LogScaleConsistency) {
  const Distribution ds[] = {Distribution::normal(1, 2), Distribution::lognormal(0.3, 0.5),
                             Distribution::gamma(0.6, 1.5), Distribution::weibull(1.7, 2.2),
                             Distribution::uniform(-1, 4)};
  for (const auto& d : ds) {
    for (double x : {0.01, 0.4, 1.0, 2.5, 3.9, 7.0}) {
      const double p = density(d, x);
      if (p > 0.0) EXPECT_NEAR(density(d, x, true), std::log(p), 1e-12 * std::max(1.0, std::abs(std::log(p))));
    }
  }
}

TEST(Distribution, UniformDegenerateAndNormalLargeSample) {
  EXPECT_THROW(Distribution::uniform(3, 3), invalid_argument);
  EXPECT_EQ(density(Distribution::lognormal(0.5, 2.0), -1.0), 0.0);
  const auto x = sample(Distribution::normal(0, 1), RngStream{17, 0, 0}, 1000000);
  EXPECT_NEAR(mean(x), 0.0, 3.0 / 1000.0);
}

TEST(LogLikelihood, KnownValueAndAdditivity) {
  EXPECT_NEAR(log_likelihood(Distribution::normal(0, 1), Dataset({0.0})), -0.5 * std::log(2.0 * std::numbers::pi),
              1e-15);
  EXPECT_NEAR(log_likelihood(Distribution::normal(0, 1), Dataset({0.0})), -0.9189385, 1e-7);
  EXPECT_EQ(log_likelihood(Distribution::lognormal(0, 1), Dataset({-1.0})), -kInf);
  const auto d = Distribution::gamma(2.0, 1.5);
  const double a = log_likelihood(d, Dataset({0.5, 1.7}));
  const double b = log_likelihood(d, Dataset({3.2}));
  EXPECT_NEAR(log_likelihood(d, Dataset({0.5, 1.7, 3.2})), a + b, 1e-13);
}

TEST(Mle, NormalTwoPoints) {
  const auto fit = mle_fit(Family::normal, Dataset({0.0, 2.0})).distribution;
  EXPECT_DOUBLE_EQ(fit.param(0), 1.0);
  EXPECT_DOUBLE_EQ(fit.param(1), 1.0);
}

TEST(Mle, GammaLargeSampleWithinFivePercent) {
  const Dataset data(sample(Distribution::gamma(2, 3), RngStream{19, 0, 0}, 100000));
  const auto fit = mle_fit(Family::gamma, data).distribution;
  EXPECT_NEAR(fit.param(0), 2.0, 0.1);
  EXPECT_NEAR(fit.param(1), 3.0, 0.15);
}

TEST(Mle, GradientVanishesAtEstimate) {
  const Dataset data({4.21, 5.87, 3.64, 6.92, 5.13, 4.78, 8.05, 5.46, 3.97, 6.31});
  for (Family f : {Family::normal, Family::lognormal, Family::gamma, Family::weibull}) {
    const auto fit = mle_fit(f, data);
    const double a = fit.distribution.param(0), b = fit.distribution.param(1);
    auto ll = [&](double x, double y) { return log_likelihood(Distribution(f, {x, y}), data); };
    const double ha = 1e-5 * std::max(1.0, std::abs(a)), hb = 1e-5 * std::max(1.0, std::abs(b));
    const double ga = (ll(a + ha, b) - ll(a - ha, b)) / (2 * ha) * std::max(1.0, std::abs(a));
    const double gb = (ll(a, b + hb) - ll(a, b - hb)) / (2 * hb) * std::max(1.0, std::abs(b));
    EXPECT_LT(std::hypot(ga, gb) / std::abs(fit.log_likelihood), 1e-6) << family_name(f);
  }
}
