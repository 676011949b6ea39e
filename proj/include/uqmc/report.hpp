#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/models.hpp"
#include "uqmc/stats.hpp"

namespace uqmc {

enum class Method { mc, cv, two_level, mlmc, mfmc, is, mmmc };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::mc: return "mc";
    case Method::cv: return "cv";
    case Method::two_level: return "two_level";
    case Method::mlmc: return "mlmc";
    case Method::mfmc: return "mfmc";
    case Method::is: return "is";
    case Method::mmmc: return "mmmc";
  }
  return "?";
}

/// Result of one estimator run.
struct EstimateReport {
  Method method = Method::mc;
  double estimate = 0.0;
  double estimator_variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  CostLedger ledger;
  std::uint64_t seed = 0;
  /// Method-specific scalars (zeta2, lambda, rho_hat, ess, ...).
  std::map<std::string, double> diagnostics;
  /// Conditions worth surfacing: fallbacks, dropped models, unmet targets.
  std::vector<std::string> flags;

  double total_cost() const { return ledger.total(); }

  std::map<std::string, std::uint64_t> n_per_model() const {
    std::map<std::string, std::uint64_t> n;
    for (const auto& [id, e] : ledger.entries()) n[id] = e.count;
    return n;
  }

  bool has_flag(const std::string& f) const {
    for (const auto& x : flags) if (x == f) return true;
    return false;
  }

  /// Sets estimate and variance and the 95% CI around them.
  void set_estimate(double value, double variance) {
    estimate = value;
    estimator_variance = variance < 0.0 ? 0.0 : variance;
    const double half = kZ975 * std::sqrt(estimator_variance);
    ci_lo = estimate - half;
    ci_hi = estimate + half;
  }
};

inline void to_json(nlohmann::json& j, const EstimateReport& r) {
  nlohmann::json n = nlohmann::json::object();
  for (const auto& [id, count] : r.n_per_model()) n[id] = count;
  j = nlohmann::json{{"method", method_name(r.method)},
                     {"estimate", r.estimate},
                     {"estimator_variance", r.estimator_variance},
                     {"ci_95", {r.ci_lo, r.ci_hi}},
                     {"n_per_model", n},
                     {"total_cost", r.total_cost()},
                     {"seed", r.seed},
                     {"diagnostics", r.diagnostics},
                     {"flags", r.flags}};
}

}  // namespace uqmc
