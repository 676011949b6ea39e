#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/models.hpp"

namespace uqmc {

/// A fully configured synthetic benchmark. Which members are set depends on
/// the problem: a plain model, a level hierarchy, a fidelity ensemble and/or
/// a dataset, plus analytic truths where they exist.
struct Problem {
  std::string name;
  std::optional<Model> model;
  std::optional<InputSampler> input;
  std::optional<Distribution> input_distribution;
  std::optional<LevelHierarchy> hierarchy;
  std::optional<FidelityEnsemble> ensemble;
  std::optional<Dataset> dataset;
  std::optional<double> truth_mean;
  std::optional<double> truth_variance;
  /// Exact E[M(l)] per level, when known.
  std::vector<double> level_means;
  /// Exact means of the low-fidelity models, in ensemble order.
  std::vector<double> low_means;
};

inline const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names = {"quadratic", "gbm_euler", "poly_fidelity", "smalldata_demo"};
  return names;
}

/// Ten observations bundled with "smalldata_demo".
inline const std::vector<double>& smalldata_demo_values() {
  static const std::vector<double> v = {4.21, 5.87, 3.64, 6.92, 5.13, 4.78, 8.05, 5.46, 3.97, 6.31};
  return v;
}

namespace detail {

class ParamReader {
 public:
  ParamReader(const std::string& problem, const nlohmann::json& params) : problem_(problem), params_(params) {
    if (!params_.is_null() && !params_.is_object()) {
      throw invalid_argument("params for problem '" + problem + "' must be an object");
    }
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    if (params_.is_null() || !params_.contains(key)) return fallback;
    const auto& v = params_.at(key);
    if (!v.is_number()) throw invalid_argument("problem '" + problem_ + "': param '" + key + "' must be a number");
    return v.get<double>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    used_.insert(key);
    if (params_.is_null() || !params_.contains(key)) return fallback;
    try {
      return params_.at(key).get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw invalid_argument("problem '" + problem_ + "': param '" + key + "' must be an array of numbers");
    }
  }

  void finish() const {
    if (params_.is_null()) return;
    for (const auto& [key, value] : params_.items()) {
      if (!used_.count(key)) throw invalid_argument("problem '" + problem_ + "': unknown param '" + key + "'");
    }
  }

 private:
  std::string problem_;
  const nlohmann::json& params_;
  std::set<std::string> used_;
};

inline Problem make_quadratic(ParamReader& p) {
  const double cost = p.number("cost", 1.0);
  p.finish();
  Problem prob;
  prob.name = "quadratic";
  Model m("quadratic", 1, cost, [](std::span<const double> x) { return x[0] * x[0]; });
  prob.input_distribution = Distribution::normal(0.0, 1.0);
  prob.input = InputSampler::iid(*prob.input_distribution);
  prob.hierarchy = LevelHierarchy::shared_input({m}, *prob.input);
  prob.model = m;
  prob.truth_mean = 1.0;
  prob.truth_variance = 2.0;
  prob.level_means = {1.0};
  return prob;
}

/// Euler-Maruyama for dS = r S dt + sigma S dW on [0, T] with 2^l steps at
/// level l. A level-l input is the vector of its 2^l Brownian increments;
/// the level below sees pairwise sums of them.
inline Problem make_gbm_euler(ParamReader& p) {
  const double s0 = p.number("S0", 20.0);
  const double r = p.number("r", 0.15);
  const double sigma = p.number("sigma", 0.1);
  const double horizon = p.number("T", 1.0);
  const double max_level_d = p.number("max_level", 10.0);
  p.finish();
  require(s0 > 0.0 && sigma >= 0.0 && horizon > 0.0, "gbm_euler: need S0 > 0, sigma >= 0, T > 0");
  require(max_level_d >= 0.0 && max_level_d <= 20.0 && max_level_d == std::floor(max_level_d),
          "gbm_euler: max_level must be an integer in [0, 20]");
  const auto max_level = static_cast<std::size_t>(max_level_d);

  std::vector<Model> models;
  std::vector<InputSampler> inputs;
  std::vector<double> level_means;
  for (std::size_t l = 0; l <= max_level; ++l) {
    const std::size_t steps = std::size_t{1} << l;
    const double h = horizon / static_cast<double>(steps);
    models.emplace_back("gbm_L" + std::to_string(l), steps, static_cast<double>(steps),
                        [s0, r, sigma, h](std::span<const double> dw) {
                          double s = s0;
                          for (double inc : dw) s += s * (r * h + sigma * inc);
                          return s;
                        });
    const double sqrt_h = std::sqrt(h);
    inputs.emplace_back(steps, [sqrt_h](SampleRng& rng, std::span<double> x) {
      for (double& v : x) v = sqrt_h * rng.normal();
    });
    level_means.push_back(s0 * std::pow(1.0 + r * h, static_cast<double>(steps)));
  }
  LevelHierarchy::CoarsenFn coarsen = [](std::size_t, std::span<const double> fine) {
    std::vector<double> c(fine.size() / 2);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = fine[2 * j] + fine[2 * j + 1];
    return c;
  };

  Problem prob;
  prob.name = "gbm_euler";
  prob.model = models.back();
  prob.input = inputs.back();
  prob.hierarchy = LevelHierarchy(std::move(models), std::move(inputs), std::move(coarsen));
  prob.truth_mean = s0 * std::exp(r * horizon);
  prob.truth_variance = s0 * s0 * std::exp(2.0 * r * horizon) * std::expm1(sigma * sigma * horizon);
  prob.level_means = std::move(level_means);
  return prob;
}

/// High model x + 0.1x^2 + 0.01 sin(5x), lows x + 0.1x^2 and x, X ~ N(0,1).
inline Problem make_poly_fidelity(ParamReader& p) {
  const auto costs = p.numbers("costs", {1.0, 0.1, 0.01});
  p.finish();
  require(costs.size() == 3, "poly_fidelity: 'costs' must list [c_hi, c_lo1, c_lo2]");
  Model hi("poly_hi", 1, costs[0], [](std::span<const double> x) {
    return x[0] + 0.1 * x[0] * x[0] + 0.01 * std::sin(5.0 * x[0]);
  });
  Model lo1("poly_lo1", 1, costs[1], [](std::span<const double> x) { return x[0] + 0.1 * x[0] * x[0]; });
  Model lo2("poly_lo2", 1, costs[2], [](std::span<const double> x) { return x[0]; });

  Problem prob;
  prob.name = "poly_fidelity";
  prob.input_distribution = Distribution::normal(0.0, 1.0);
  prob.input = InputSampler::iid(*prob.input_distribution);
  prob.model = hi;
  prob.ensemble = FidelityEnsemble(hi, {lo1, lo2}, *prob.input);
  if (costs[2] < costs[1] && costs[1] < costs[0]) {
    prob.hierarchy = LevelHierarchy::shared_input({lo2, lo1, hi}, *prob.input);
    prob.level_means = {0.0, 0.1, 0.1};
  }
  // E[sin 5X] = E[X^2 sin 5X] = 0, E[X sin 5X] = 5 e^{-12.5}, E[sin^2 5X] = (1 - e^{-50}) / 2.
  prob.truth_mean = 0.1;
  prob.truth_variance = 1.02 + 2.0 * 0.01 * 5.0 * std::exp(-12.5) + 1e-4 * 0.5 * -std::expm1(-50.0);
  prob.low_means = {0.1, 0.0};
  return prob;
}

inline Problem make_smalldata_demo(ParamReader& p) {
  const double coefficient = p.number("coefficient", 0.3);
  p.finish();
  Problem prob;
  prob.name = "smalldata_demo";
  prob.model = Model("exp_response", 1, 1.0,
                     [coefficient](std::span<const double> x) { return std::exp(coefficient * x[0]); });
  prob.dataset = Dataset(smalldata_demo_values());
  return prob;
}

}  // namespace detail

/// Built-in synthetic benchmark by name with optional JSON parameters.
inline Problem builtin_problem(const std::string& name, const nlohmann::json& params = nullptr) {
  detail::ParamReader reader(name, params);
  if (name == "quadratic") return detail::make_quadratic(reader);
  if (name == "gbm_euler") return detail::make_gbm_euler(reader);
  if (name == "poly_fidelity") return detail::make_poly_fidelity(reader);
  if (name == "smalldata_demo") return detail::make_smalldata_demo(reader);
  throw invalid_argument("unknown problem '" + name + "'");
}

}  // namespace uqmc
