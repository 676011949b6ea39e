#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "uqmc/errors.hpp"
#include "uqmc/models.hpp"
#include "uqmc/problems.hpp"

using namespace uqmc;

namespace {

Model square(double cost = 1.0) {
  return Model("sq", 1, cost, [](std::span<const double> x) { return x[0] * x[0]; });
}

}  // namespace

TEST(Model, RejectsBadConstruction) {
  EXPECT_THROW(Model("m", 0, 1.0, [](std::span<const double>) { return 0.0; }), invalid_argument);
  EXPECT_THROW(Model("m", 1, 0.0, [](std::span<const double>) { return 0.0; }), invalid_argument);
  EXPECT_THROW(Model("m", 1, 1.0, nullptr), invalid_argument);
}

TEST(CostLedger, CountsAndTotals) {
  CostLedger ledger;
  const auto a = square(2.5);
  const Model b("b", 1, 0.1, [](std::span<const double> x) { return x[0]; });
  ledger.charge(a, 4);
  ledger.charge(b, 10);
  ledger.charge(a, 2);
  EXPECT_EQ(ledger.count("sq"), 6u);
  EXPECT_EQ(ledger.count("missing"), 0u);
  EXPECT_EQ(ledger.total_evaluations(), 16u);
  EXPECT_DOUBLE_EQ(ledger.total(), 6 * 2.5 + 10 * 0.1);
  CostLedger other;
  other.charge(b, 5);
  ledger.merge(other);
  EXPECT_EQ(ledger.count("b"), 15u);
}

TEST(Evaluate, ChargesLedgerAndChecksDimension) {
  CostLedger ledger;
  const auto y = evaluate(square(), InputBatch::from_rows({{1.0}, {2.0}, {-3.0}}), ledger);
  EXPECT_EQ(y, (std::vector<double>{1.0, 4.0, 9.0}));
  EXPECT_EQ(ledger.count("sq"), 3u);
  EXPECT_THROW(evaluate(square(), InputBatch::from_rows({{1.0, 2.0}}), ledger), invalid_argument);
}

TEST(Evaluate, NonFiniteOutputIsNumericError) {
  CostLedger ledger;
  const Model bad("bad", 1, 1.0, [](std::span<const double> x) { return std::log(x[0]); });
  try {
    evaluate(bad, InputBatch::from_rows({{1.0}, {-1.0}}), ledger, Executor{2});
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
}

TEST(InputSampler, BatchRowsFollowStreamIndex) {
  const auto s = InputSampler::iid(Distribution::normal(0, 1), 3);
  const RngStream rng{4, 0, 0};
  const auto b1 = s.draw_batch(rng, 10, Executor{1});
  const auto b4 = s.draw_batch(rng, 10, Executor{4});
  const auto tail = s.draw_batch(rng.advanced(6), 4);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(b1.row(i)[k], b4.row(i)[k]);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tail.row(i)[0], b1.row(6 + i)[0]);
  const auto pre = b1.prefix(3);
  EXPECT_EQ(pre.rows(), 3u);
  EXPECT_EQ(pre.row(2)[1], b1.row(2)[1]);
}

TEST(LevelHierarchy, RequiresIncreasingCosts) {
  const auto in = InputSampler::iid(Distribution::normal(0, 1));
  EXPECT_THROW(LevelHierarchy::shared_input({square(2.0), square(1.0)}, in), invalid_argument);
}

TEST(GbmEuler, CoarseLevelSeesSummedIncrements) {
  const double s0 = 20.0, r = 0.15, sigma = 0.1;
  const auto prob = builtin_problem("gbm_euler", {{"max_level", 3}});
  const auto& h = *prob.hierarchy;
  ASSERT_EQ(h.size(), 4u);
  CostLedger ledger;
  const RngStream rng{21, 0, 0};
  const auto cs = coupled_samples(h, 2, 1, rng, 5, ledger);
  const auto x = h.input(2).draw_batch(rng, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto dw = x.row(i);
    double fine = s0;
    for (double w : dw) fine += fine * (r * 0.25 + sigma * w);
    double coarse = s0;
    for (double w : {dw[0] + dw[1], dw[2] + dw[3]}) coarse += coarse * (r * 0.5 + sigma * w);
    EXPECT_NEAR(cs.fine[i], fine, 1e-12);
    EXPECT_NEAR(cs.coarse[i], coarse, 1e-12);
    EXPECT_NEAR(cs.differences()[i], fine - coarse, 1e-12);
  }
  EXPECT_EQ(ledger.count("gbm_L2"), 5u);
  EXPECT_EQ(ledger.count("gbm_L1"), 5u);
  EXPECT_DOUBLE_EQ(ledger.total(), 5 * 4.0 + 5 * 2.0);
}

TEST(GbmEuler, LevelMeansAreEulerMeans) {
  const auto prob = builtin_problem("gbm_euler", {{"max_level", 4}});
  for (std::size_t l = 0; l <= 4; ++l) {
    const double h = 1.0 / std::pow(2.0, l);
    EXPECT_NEAR(prob.level_means[l], 20.0 * std::pow(1.0 + 0.15 * h, std::pow(2.0, l)), 1e-12);
  }
  EXPECT_NEAR(*prob.truth_mean, 20.0 * std::exp(0.15), 1e-12);
}

TEST(LevelHierarchy, SelectComposesCoarsening) {
  const auto prob = builtin_problem("gbm_euler", {{"max_level", 3}});
  const auto sub = prob.hierarchy->select({0, 3});
  ASSERT_EQ(sub.size(), 2u);
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(sub.coarsen(1, 0, x), std::vector<double>{36.0});
  EXPECT_EQ(prob.hierarchy->truncated(1).size(), 2u);
}

TEST(Problems, UnknownNamesAndParams) {
  EXPECT_THROW(builtin_problem("nope"), invalid_argument);
  EXPECT_THROW(builtin_problem("quadratic", {{"costt", 1.0}}), invalid_argument);
  EXPECT_THROW(builtin_problem("poly_fidelity", {{"costs", {1.0, 0.1}}}), invalid_argument);
}

TEST(Problems, PolyFidelityTruth) {
  const auto prob = builtin_problem("poly_fidelity");
  ASSERT_TRUE(prob.ensemble.has_value());
  EXPECT_EQ(prob.ensemble->lows.size(), 2u);
  EXPECT_DOUBLE_EQ(*prob.truth_mean, 0.1);
  const double x = 0.7;
  const std::vector<double> in = {x};
  EXPECT_DOUBLE_EQ(prob.ensemble->high(in), x + 0.1 * x * x + 0.01 * std::sin(5 * x));
  EXPECT_DOUBLE_EQ(prob.ensemble->lows[1](in), x);
}

TEST(Evaluate, ConstantAndSquareExamples) {
  CostLedger ledger;
  const Model c("const", 1, 0.5, [](std::span<const double>) { return 2.5; });
  EXPECT_EQ(evaluate(c, InputBatch::from_rows({{1.0}, {-4.0}, {9.0}}), ledger), (std::vector<double>(3, 2.5)));
  EXPECT_DOUBLE_EQ(ledger.total(), 1.5);
  EXPECT_EQ(evaluate(square(), InputBatch::from_rows({{2.0}}), ledger), std::vector<double>{4.0});
}

TEST(Evaluate, RepeatableBatch) {
  const auto prob = builtin_problem("gbm_euler", {{"max_level", 5}});
  const auto x = prob.hierarchy->input(5).draw_batch(RngStream{2, 0, 0}, 200);
  CostLedger a, b;
  EXPECT_EQ(evaluate(prob.hierarchy->model(5), x, a), evaluate(prob.hierarchy->model(5), x, b, Executor{4}));
  EXPECT_EQ(a.total(), b.total());
  EXPECT_EQ(a.count("gbm_L5"), b.count("gbm_L5"));
}

TEST(GbmEuler, CorrectionVarianceDecays) {
  const auto prob = builtin_problem("gbm_euler", {{"max_level", 4}});
  const auto& h = *prob.hierarchy;
  CostLedger ledger;
  double prev = kInf;
  for (std::size_t l = 1; l <= 4; ++l) {
    const auto cs = coupled_samples(h, l, l - 1, RngStream{40 + l, 0, 0}, 10000, ledger);
    const double vy = sample_variance(cs.differences());
    EXPECT_LT(vy, sample_variance(cs.fine)) << l;
    EXPECT_LT(vy, prev) << l;
    prev = vy;
  }
}

TEST(GbmEuler, DriftlessTruthIsInitialValue) {
  const auto prob = builtin_problem("gbm_euler", {{"r", 0.0}});
  EXPECT_DOUBLE_EQ(*prob.truth_mean, 20.0);
  EXPECT_DOUBLE_EQ(*builtin_problem("quadratic").truth_mean, 1.0);
}
