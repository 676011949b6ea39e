#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "uqmc/errors.hpp"
#include "uqmc/importance.hpp"
#include "uqmc/mc.hpp"
#include "uqmc/mixture.hpp"

using namespace uqmc;

namespace {

// Integral of N(x; a, sa) N(x; b, sb) dx = N(a - b; 0, sqrt(sa^2 + sb^2)).
double gauss_overlap(double a, double sa, double b, double sb) {
  const double v = sa * sa + sb * sb;
  return std::exp(-(a - b) * (a - b) / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
}

ParameterPosterior fake_posterior(Family f, std::vector<Distribution> samples) {
  ParameterPosterior p;
  p.family = f;
  p.samples = std::move(samples);
  return p;
}

}  // namespace

TEST(MixtureDensity, PdfAndLogPdf) {
  const MixtureDensity q({0.5, 0.5}, {Distribution::normal(0, 1), Distribution::normal(2, 1)});
  EXPECT_NEAR(q.pdf(1.0), 0.24197072451914337, 1e-15);
  EXPECT_NEAR(q.log_pdf(1.0), std::log(0.24197072451914337), 1e-14);
  EXPECT_NEAR(q.log_pdf(60.0), std::log(0.5) - 0.5 * 58.0 * 58.0 - 0.5 * std::log(2.0 * std::numbers::pi), 1e-9);
  EXPECT_TRUE(q.normalized());
}

TEST(MixtureDensity, RenormalizesAndValidates) {
  const MixtureDensity q({2.0, 6.0}, {Distribution::normal(0, 1), Distribution::normal(2, 1)});
  EXPECT_DOUBLE_EQ(q.weights()[0], 0.25);
  EXPECT_THROW(MixtureDensity({-1.0, 2.0}, {Distribution::normal(0, 1), Distribution::normal(2, 1)}),
               invalid_argument);
  EXPECT_THROW(MixtureDensity({1.0}, {Distribution::normal(0, 1), Distribution::normal(2, 1)}), invalid_argument);
}

TEST(MixtureDensity, SupportIntervalsAndCoverage) {
  const MixtureDensity q({1, 1, 1}, {Distribution::uniform(0, 1), Distribution::uniform(0.5, 2),
                                     Distribution::uniform(3, 4)});
  const auto s = q.support();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], std::make_pair(0.0, 2.0));
  EXPECT_EQ(s[1], std::make_pair(3.0, 4.0));
  EXPECT_TRUE(q.covers(Distribution::uniform(0.2, 1.8)));
  EXPECT_FALSE(q.covers(Distribution::uniform(1.5, 3.5)));
  EXPECT_FALSE(q.covers(Distribution::gamma(2, 1)));
  const MixtureDensity g(Distribution::lognormal(0, 1));
  EXPECT_TRUE(g.covers(Distribution::weibull(2, 1)));
  EXPECT_FALSE(g.covers(Distribution::normal(0, 1)));
}

TEST(MixtureDensity, SamplingMatchesMean) {
  const MixtureDensity q({0.3, 0.7}, {Distribution::normal(-1, 1), Distribution::gamma(2, 1.5)});
  const RngStream rng{6, 0, 0};
  std::vector<double> x(100000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto g = rng.at(i);
    x[i] = draw(q, g);
  }
  const double expected = 0.3 * -1.0 + 0.7 * 3.0;
  EXPECT_NEAR(mean(x), expected, 4.0 * std::sqrt(sample_variance(x) / x.size()));
}

TEST(MixtureDensity, IntegratesToOne) {
  const MixtureDensity q({0.2, 0.3, 0.5}, {Distribution::lognormal(1.5, 0.3), Distribution::uniform(2, 9),
                                           Distribution::weibull(3, 6)});
  EXPECT_NEAR(mixture_integral(q), 1.0, 1e-8);
}

TEST(Emsd, MatchesGaussianClosedForm) {
  const MixtureDensity q(Distribution::normal(0, 1));
  EmsdTargets t;
  t.groups = {{Distribution::normal(1, 2)}};
  t.weight = {1.0};
  const double expected =
      0.5 * (gauss_overlap(1, 2, 1, 2) - 2.0 * gauss_overlap(0, 1, 1, 2) + gauss_overlap(0, 1, 0, 1));
  EXPECT_NEAR(emsd(q, t), expected, 1e-9);
  t.groups = {{Distribution::normal(0, 1)}};
  EXPECT_NEAR(emsd(q, t), 0.0, 1e-10);
}

TEST(Emsd, EnsembleMeanBeatsOtherWeights) {
  const std::vector<Distribution> comps = {Distribution::normal(0, 1), Distribution::normal(1.5, 0.7),
                                           Distribution::gamma(3, 1)};
  EmsdTargets t;
  t.groups = {comps};
  t.weight = {1.0};
  const double best = emsd(MixtureDensity({1, 1, 1}, comps), t);
  for (const auto& w : std::vector<std::vector<double>>{{2, 1, 1}, {1, 1, 2}, {1, 0.8, 1}, {1, 0, 0}})
    EXPECT_GT(emsd(MixtureDensity(w, comps), t), best);
}

TEST(OptimalMixture, WeightedAndEqualModes) {
  ModelProbabilities mp;
  mp.families = {Family::normal, Family::gamma, Family::weibull};
  mp.pi = {0.6, 0.4, 0.0};
  PosteriorMap posts;
  posts.emplace(Family::normal, fake_posterior(Family::normal, {Distribution::normal(0, 1), Distribution::normal(1, 1)}));
  posts.emplace(Family::gamma, fake_posterior(Family::gamma, {Distribution::gamma(2, 1)}));
  posts.emplace(Family::weibull, fake_posterior(Family::weibull, {Distribution::weibull(2, 1)}));
  const auto w = optimal_mixture(mp, posts, MixtureMode::weighted);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w.weights()[0], 0.3);
  EXPECT_DOUBLE_EQ(w.weights()[2], 0.4);
  const auto e = optimal_mixture(mp, posts, MixtureMode::equal);
  ASSERT_EQ(e.size(), 4u);
  EXPECT_NEAR(e.weights()[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(e.weights()[3], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(parse_mixture_mode("equal"), MixtureMode::equal);
  EXPECT_THROW(parse_mixture_mode("uniform"), invalid_argument);
}

TEST(CandidateSet, FollowsProbabilities) {
  ModelProbabilities mp;
  mp.families = {Family::normal, Family::gamma, Family::weibull};
  mp.pi = {0.25, 0.75, 0.0};
  PosteriorMap posts;
  posts.emplace(Family::normal, fake_posterior(Family::normal, {Distribution::normal(0, 1)}));
  posts.emplace(Family::gamma, fake_posterior(Family::gamma, {Distribution::gamma(2, 1), Distribution::gamma(3, 1)}));
  const auto set = build_candidate_set(mp, posts, 4000, RngStream{7, 0, 0});
  const auto again = build_candidate_set(mp, posts, 4000, RngStream{7, 0, 0});
  EXPECT_EQ(set.entries, again.entries);
  std::size_t normals = 0, gamma3 = 0;
  for (const auto& d : set.entries) {
    EXPECT_NE(d.family(), Family::weibull);
    normals += d.family() == Family::normal;
    gamma3 += d == Distribution::gamma(3, 1);
  }
  EXPECT_NEAR(normals / 4000.0, 0.25, 4.0 * std::sqrt(0.25 * 0.75 / 4000));
  EXPECT_NEAR(gamma3 / 4000.0, 0.375, 4.0 * std::sqrt(0.375 * 0.625 / 4000));
  const auto groups = emsd_targets(set);
  EXPECT_EQ(groups.groups.size(), 2u);
}

TEST(ImportanceSampling, UnbiasedForSecondMoment) {
  const Model sq("sq", 1, 1.0, [](std::span<const double> x) { return x[0] * x[0]; });
  const auto rep = is_estimate(sq, Distribution::normal(0, 1), Distribution::normal(0, 2), 50000, RngStream{1, 0, 0});
  EXPECT_NEAR(rep.estimate, 1.0, 4.0 * std::sqrt(rep.estimator_variance));
  EXPECT_LT(rep.diagnostics.at("ess"), 50000.0);
  EXPECT_NEAR(rep.diagnostics.at("mean_weight"), 1.0, 0.02);
}

TEST(ImportanceSampling, MatchesHandComputation) {
  const Model id("id", 1, 1.0, [](std::span<const double> x) { return x[0]; });
  const auto p = Distribution::normal(1, 1);
  const auto q = Distribution::normal(0, 1.5);
  const RngStream rng{2, 0, 0};
  const auto rep = is_estimate(id, p, q, 3, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    auto g = rng.at(i);
    const double x = draw(q, g);
    s += density(p, x) / density(q, x) * x;
  }
  EXPECT_NEAR(rep.estimate, s / 3.0, 1e-13);
}

TEST(Propagation, SingleLoopChargesOnlyN) {
  const Model m("exp", 1, 1.0, [](std::span<const double> x) { return std::exp(0.3 * x[0]); });
  const std::vector<Distribution> targets = {Distribution::gamma(10, 0.5), Distribution::lognormal(1.6, 0.25),
                                             Distribution::weibull(4, 6)};
  const MixtureDensity q({1, 1, 1}, targets);
  PropagationCache cache;
  const auto rep = propagate_multimodel(m, q, targets, 4000, RngStream{3, 0, 0}, Executor{2}, &cache);
  EXPECT_EQ(rep.ledger.total_evaluations(), 4000u);
  EXPECT_EQ(cache.x.size(), 4000u);
  ASSERT_EQ(rep.estimates.size(), 3u);
  // E[exp(0.3 X)] for a Gamma(k, s) is (1 - 0.3 s)^-k.
  EXPECT_NEAR(rep.estimates[0], std::pow(1.0 - 0.15, -10.0), 4.0 * rep.std_errors[0]);
  const auto direct = reweight(cache, targets);
  EXPECT_EQ(direct.estimates, rep.estimates);
  EXPECT_EQ(rep.quantiles.size(), 5u);
}

TEST(Propagation, TargetOutsideProposalIsNumericError) {
  const Model m("id", 1, 1.0, [](std::span<const double> x) { return x[0]; });
  const MixtureDensity q(Distribution::gamma(2, 1));
  EXPECT_THROW(propagate_multimodel(m, q, {Distribution::normal(0, 1)}, 100, RngStream{1, 0, 0}), numeric_error);
}

TEST(CandidateSet, SinglePosteriorSampleRepeats) {
  ModelProbabilities mp;
  mp.families = {Family::gamma};
  mp.pi = {1.0};
  PosteriorMap posts;
  posts.emplace(Family::gamma, fake_posterior(Family::gamma, {Distribution::gamma(2.5, 1.5)}));
  const auto set = build_candidate_set(mp, posts, 50, RngStream{1, 0, 0});
  EXPECT_EQ(set.entries, std::vector<Distribution>(50, Distribution::gamma(2.5, 1.5)));
}

TEST(CandidateSet, TwoFamilyFrequency) {
  ModelProbabilities mp;
  mp.families = {Family::normal, Family::gamma};
  mp.pi = {0.7, 0.3};
  PosteriorMap posts;
  posts.emplace(Family::normal, fake_posterior(Family::normal, {Distribution::normal(0, 1)}));
  posts.emplace(Family::gamma, fake_posterior(Family::gamma, {Distribution::gamma(2, 1)}));
  const auto set = build_candidate_set(mp, posts, 10000, RngStream{2, 0, 0});
  std::size_t normals = 0;
  for (const auto& d : set.entries) normals += d.family() == Family::normal;
  EXPECT_NEAR(normals / 1e4, 0.7, 3.0 * std::sqrt(0.21 / 1e4));
}

TEST(OptimalMixture, SingleParameterGivesThatDensity) {
  ModelProbabilities mp;
  mp.families = {Family::weibull};
  mp.pi = {1.0};
  PosteriorMap posts;
  posts.emplace(Family::weibull, fake_posterior(Family::weibull, {Distribution::weibull(2, 3)}));
  const auto q = optimal_mixture(mp, posts, MixtureMode::weighted);
  for (double x : {0.1, 1.0, 2.5, 7.0}) EXPECT_EQ(q.pdf(x), density(Distribution::weibull(2, 3), x));
}

TEST(OptimalMixture, ComponentWeightsExample) {
  ModelProbabilities mp;
  mp.families = {Family::normal, Family::gamma};
  mp.pi = {0.7, 0.3};
  PosteriorMap posts;
  posts.emplace(Family::normal, fake_posterior(Family::normal, {Distribution::normal(0, 1), Distribution::normal(1, 2)}));
  posts.emplace(Family::gamma, fake_posterior(Family::gamma, {Distribution::gamma(2, 1)}));
  const auto q = optimal_mixture(mp, posts, MixtureMode::weighted);
  ASSERT_EQ(q.size(), 3u);
  EXPECT_NEAR(q.weights()[0], 0.35, 1e-15);
  EXPECT_NEAR(q.weights()[1], 0.35, 1e-15);
  EXPECT_NEAR(q.weights()[2], 0.3, 1e-15);
}

TEST(Emsd, DuplicateTargetsAreMatchedExactly) {
  const auto d = Distribution::gamma(3, 2);
  EmsdTargets t;
  t.groups = {{d, d, d}};
  t.weight = {1.0};
  EXPECT_NEAR(emsd(MixtureDensity(d), t), 0.0, 1e-12);
}

TEST(ImportanceSampling, ProposalEqualToTargetHasUnitWeights) {
  const Model id("id", 1, 1.0, [](std::span<const double> x) { return x[0]; });
  const auto p = Distribution::lognormal(0.2, 0.4);
  const auto rep = is_estimate(id, p, p, 1000, RngStream{4, 0, 0});
  EXPECT_EQ(rep.diagnostics.at("mean_weight"), 1.0);
  EXPECT_EQ(rep.diagnostics.at("ess"), 1000.0);
  const auto mc = mc_estimate(id, InputSampler::iid(p), 1000, RngStream{4, 0, 0});
  EXPECT_NEAR(rep.estimate, mc.estimate, 1e-12);
}

TEST(ImportanceSampling, ConstantModelGivesConstantUpToWeights) {
  const Model c("c", 1, 1.0, [](std::span<const double>) { return 4.5; });
  const auto rep = is_estimate(c, Distribution::normal(0, 1), Distribution::normal(0, 1), 100, RngStream{5, 0, 0});
  EXPECT_EQ(rep.estimate, 4.5);
}

TEST(ImportanceSampling, WiderProposalSecondMoment) {
  const Model sq("sq", 1, 1.0, [](std::span<const double> x) { return x[0] * x[0]; });
  const auto rep = is_estimate(sq, Distribution::normal(0, 1), Distribution::normal(0, 2), 1000000, RngStream{6, 0, 0});
  EXPECT_NEAR(rep.estimate, 1.0, 3.0 * std::sqrt(rep.estimator_variance));
}

TEST(ImportanceSampling, ReplicationsUnbiased) {
  const Model m("exp", 1, 1.0, [](std::span<const double> x) { return std::exp(0.5 * x[0]); });
  std::vector<double> est;
  for (std::uint64_t r = 0; r < 200; ++r)
    est.push_back(is_estimate(m, Distribution::normal(0, 1), Distribution::normal(0.3, 1.5), 500, RngStream{r, 3, 0}).estimate);
  EXPECT_NEAR(mean(est), std::exp(0.125), 3.0 * std::sqrt(sample_variance(est) / 200.0));
}

TEST(Propagation, SingleTargetEqualToProposalIsPlainMc) {
  const Model id("id", 1, 1.0, [](std::span<const double> x) { return x[0]; });
  const auto p = Distribution::normal(0, 1);
  const auto rep = propagate_multimodel(id, MixtureDensity(p), std::vector<Distribution>{p}, 100000, RngStream{7, 0, 0});
  EXPECT_EQ(rep.quantiles.front(), rep.quantiles.back());
  EXPECT_NEAR(rep.estimates[0], 0.0, 3.0 / std::sqrt(1e5));
}
