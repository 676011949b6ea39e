#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/distributions.hpp"
#include "uqmc/inference.hpp"
#include "uqmc/mixture.hpp"

namespace uqmc::cli {

/// Invalid configuration; `path` is a JSON pointer to the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class RunMethod { mc, cv, two_level, mlmc, mfmc, mmmc };

inline const std::vector<std::string>& run_method_names() {
  static const std::vector<std::string> names = {"mc", "cv", "two_level", "mlmc", "mfmc", "mmmc"};
  return names;
}

struct RunConfig {
  RunMethod method = RunMethod::mc;
  std::string problem = "quadratic";
  nlohmann::json problem_params = nullptr;
  std::uint64_t seed = 0;
  std::string output_dir = "uqmc_out";
  unsigned workers = 1;
  bool dump_samples = false;

  // mc, cv
  std::size_t n = 0;
  // cv
  std::optional<std::string> control;
  std::optional<double> control_mean;
  std::optional<double> lambda;  // unset = auto
  std::size_t pilot_n = 100;
  // two_level, mfmc
  double budget = 0.0;
  std::vector<std::size_t> levels = {0, 1};
  std::size_t pilot = 50;
  // mlmc
  double eps = 0.0;
  std::optional<std::size_t> max_level;
  std::size_t initial_samples = 100;
  std::optional<std::size_t> fixed_level;
  std::optional<double> max_cost;
  // mmmc
  std::optional<std::string> data;
  std::vector<Family> families = {Family::normal, Family::lognormal, Family::gamma, Family::weibull};
  InferenceMethod inference = InferenceMethod::aic;
  std::vector<double> model_prior;
  std::size_t ensemble_size = 100;
  std::size_t samples = 5000;
  MixtureMode mixture = MixtureMode::weighted;
  std::size_t max_components = 500;
  McmcOptions mcmc;
  std::size_t evidence_samples = 100000;
  bool dump_estimates = false;

  /// Parsed JSON as given, for the report echo.
  nlohmann::json source;
};

inline std::string method_string(RunMethod m) { return run_method_names()[static_cast<std::size_t>(m)]; }

namespace detail {

/// Optimal string alignment distance: Levenshtein plus adjacent transpositions.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[a.size()][b.size()];
}

inline std::string nearest(const std::string& key, const std::vector<std::string>& allowed) {
  std::string best;
  std::size_t best_d = SIZE_MAX;
  for (const auto& a : allowed) {
    const auto d = edit_distance(key, a);
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best_d <= std::max<std::size_t>(2, key.size() / 3) ? best : std::string();
}

inline const std::vector<std::string>& common_keys() {
  static const std::vector<std::string> k = {"method", "problem", "seed", "output_dir", "workers"};
  return k;
}

inline std::vector<std::string> method_keys(RunMethod m) {
  switch (m) {
    case RunMethod::mc: return {"n", "dump_samples"};
    case RunMethod::cv: return {"n", "control", "control_mean", "lambda", "pilot_n", "dump_samples"};
    case RunMethod::two_level: return {"budget", "levels", "pilot"};
    case RunMethod::mlmc: return {"eps", "max_level", "initial_samples", "fixed_level", "max_cost"};
    case RunMethod::mfmc: return {"budget", "pilot"};
    case RunMethod::mmmc:
      return {"data", "families", "inference", "model_prior", "ensemble_size", "samples", "mixture",
              "max_components", "mcmc", "evidence_samples", "dump_estimates"};
  }
  return {};
}

inline std::vector<std::string> required_keys(RunMethod m) {
  switch (m) {
    case RunMethod::mc:
    case RunMethod::cv: return {"n"};
    case RunMethod::two_level:
    case RunMethod::mfmc: return {"budget"};
    case RunMethod::mlmc: return {"eps"};
    case RunMethod::mmmc: return {};
  }
  return {};
}

class Reader {
 public:
  explicit Reader(const nlohmann::json& j) : j_(j) {}

  bool has(const std::string& key) const { return j_.contains(key); }

  std::size_t count(const std::string& key, std::size_t min_value) const {
    const auto& v = j_.at(key);
    if (!v.is_number_integer() && !(v.is_number_float() && v.get<double>() == std::floor(v.get<double>()))) {
      throw ConfigError("/" + key, "must be an integer");
    }
    const double d = v.get<double>();
    if (d < static_cast<double>(min_value)) {
      throw ConfigError("/" + key, "must be at least " + std::to_string(min_value));
    }
    return static_cast<std::size_t>(d);
  }

  double positive(const std::string& key) const {
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("/" + key, "must be a number");
    const double d = v.get<double>();
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("/" + key, "must be positive");
    return d;
  }

  double number(const std::string& key) const {
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("/" + key, "must be a number");
    return v.get<double>();
  }

  std::string string(const std::string& key) const {
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("/" + key, "must be a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key) const {
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("/" + key, "must be true or false");
    return v.get<bool>();
  }

 private:
  const nlohmann::json& j_;
};

}  // namespace detail

/// Parses and checks a run configuration. Unknown keys, missing required
/// keys and ill-typed values raise ConfigError naming the field.
inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  if (!j.contains("method")) throw ConfigError("/method", "required field is missing");
  if (!j.at("method").is_string()) throw ConfigError("/method", "must be a string");
  const auto mname = j.at("method").get<std::string>();
  const auto& names = run_method_names();
  const auto mit = std::find(names.begin(), names.end(), mname);
  if (mit == names.end()) {
    std::string msg = "unknown method '" + mname + "'";
    const auto near = detail::nearest(mname, names);
    if (!near.empty()) msg += "; did you mean '" + near + "'?";
    throw ConfigError("/method", msg);
  }
  RunConfig c;
  c.source = j;
  c.method = static_cast<RunMethod>(mit - names.begin());

  std::vector<std::string> allowed = detail::common_keys();
  for (const auto& k : detail::method_keys(c.method)) allowed.push_back(k);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    std::string msg = "unknown key '" + key + "' for method '" + mname + "'";
    const auto near = detail::nearest(key, allowed);
    if (!near.empty()) msg += "; did you mean '" + near + "'?";
    throw ConfigError("/" + key, msg);
  }
  for (const auto& k : detail::required_keys(c.method)) {
    if (!j.contains(k)) throw ConfigError("/" + k, "required field '" + k + "' is missing for method '" + mname + "'");
  }

  detail::Reader r(j);
  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    if (p.is_string()) {
      c.problem = p.get<std::string>();
    } else if (p.is_object()) {
      for (const auto& [key, value] : p.items()) {
        if (key != "name" && key != "params") throw ConfigError("/problem/" + key, "unknown key; expected 'name' or 'params'");
      }
      if (!p.contains("name") || !p.at("name").is_string()) throw ConfigError("/problem/name", "must be a string");
      c.problem = p.at("name").get<std::string>();
      if (p.contains("params")) {
        if (!p.at("params").is_object()) throw ConfigError("/problem/params", "must be an object");
        c.problem_params = p.at("params");
      }
    } else {
      throw ConfigError("/problem", "must be a problem name or {\"name\", \"params\"}");
    }
  } else if (c.method == RunMethod::mmmc) {
    c.problem = "smalldata_demo";
  } else {
    throw ConfigError("/problem", "required field is missing");
  }
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("/seed", "must be a non-negative integer");
    }
    c.seed = v.get<std::uint64_t>();
  }
  if (j.contains("output_dir")) c.output_dir = r.string("output_dir");
  if (j.contains("workers")) c.workers = static_cast<unsigned>(r.count("workers", 1));

  switch (c.method) {
    case RunMethod::mc:
      c.n = r.count("n", 2);
      if (r.has("dump_samples")) c.dump_samples = r.boolean("dump_samples");
      break;
    case RunMethod::cv:
      c.n = r.count("n", 2);
      if (r.has("dump_samples")) c.dump_samples = r.boolean("dump_samples");
      if (r.has("control")) c.control = r.string("control");
      if (r.has("control_mean")) c.control_mean = r.number("control_mean");
      if (r.has("pilot_n")) c.pilot_n = r.count("pilot_n", 2);
      if (r.has("lambda")) {
        const auto& v = j.at("lambda");
        if (v.is_string()) {
          if (v.get<std::string>() != "auto") throw ConfigError("/lambda", "must be a number or \"auto\"");
        } else {
          c.lambda = r.number("lambda");
        }
      }
      break;
    case RunMethod::two_level:
      c.budget = r.positive("budget");
      if (r.has("pilot")) c.pilot = r.count("pilot", 2);
      if (r.has("levels")) {
        const auto& v = j.at("levels");
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned() ||
            v[0].get<std::size_t>() >= v[1].get<std::size_t>()) {
          throw ConfigError("/levels", "must be [coarse, fine] with coarse < fine");
        }
        c.levels = v.get<std::vector<std::size_t>>();
      }
      break;
    case RunMethod::mlmc:
      c.eps = r.positive("eps");
      if (r.has("max_level")) c.max_level = r.count("max_level", 0);
      if (r.has("initial_samples")) c.initial_samples = r.count("initial_samples", 2);
      if (r.has("fixed_level")) c.fixed_level = r.count("fixed_level", 0);
      if (r.has("max_cost")) c.max_cost = r.positive("max_cost");
      break;
    case RunMethod::mfmc:
      c.budget = r.positive("budget");
      if (r.has("pilot")) c.pilot = r.count("pilot", 10);
      break;
    case RunMethod::mmmc: {
      if (r.has("data")) c.data = r.string("data");
      if (r.has("families")) {
        const auto& v = j.at("families");
        if (!v.is_array() || v.empty()) throw ConfigError("/families", "must be a nonempty array of family names");
        c.families.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (!v[i].is_string()) throw ConfigError("/families/" + std::to_string(i), "must be a string");
          try {
            c.families.push_back(parse_family(v[i].get<std::string>()));
          } catch (const std::exception& e) {
            throw ConfigError("/families/" + std::to_string(i), e.what());
          }
        }
      }
      if (r.has("inference")) {
        const auto s = r.string("inference");
        if (s == "aic") c.inference = InferenceMethod::aic;
        else if (s == "bayes") c.inference = InferenceMethod::bayes;
        else throw ConfigError("/inference", "must be \"aic\" or \"bayes\"");
      }
      if (r.has("model_prior")) {
        const auto& v = j.at("model_prior");
        if (!v.is_array()) throw ConfigError("/model_prior", "must be an array of numbers");
        for (const auto& x : v) {
          if (!x.is_number() || x.get<double>() < 0.0) throw ConfigError("/model_prior", "entries must be non-negative numbers");
          c.model_prior.push_back(x.get<double>());
        }
        if (c.model_prior.size() != c.families.size()) {
          throw ConfigError("/model_prior", "needs one entry per family");
        }
      }
      if (r.has("ensemble_size")) c.ensemble_size = r.count("ensemble_size", 1);
      if (r.has("samples")) c.samples = r.count("samples", 2);
      if (r.has("mixture")) {
        try {
          c.mixture = parse_mixture_mode(r.string("mixture"));
        } catch (const uqmc::invalid_argument& e) {
          throw ConfigError("/mixture", e.what());
        }
      }
      if (r.has("max_components")) c.max_components = r.count("max_components", 1);
      if (r.has("evidence_samples")) c.evidence_samples = r.count("evidence_samples", 1000);
      if (r.has("dump_estimates")) c.dump_estimates = r.boolean("dump_estimates");
      if (r.has("mcmc")) {
        const auto& m = j.at("mcmc");
        if (!m.is_object()) throw ConfigError("/mcmc", "must be an object");
        detail::Reader mr(m);
        for (const auto& [key, value] : m.items()) {
          static const std::vector<std::string> mk = {"burn_in", "keep", "thin"};
          if (std::find(mk.begin(), mk.end(), key) == mk.end()) {
            std::string msg = "unknown key '" + key + "'";
            const auto near = detail::nearest(key, mk);
            if (!near.empty()) msg += "; did you mean '" + near + "'?";
            throw ConfigError("/mcmc/" + key, msg);
          }
        }
        try {
          if (mr.has("burn_in")) c.mcmc.burn_in = mr.count("burn_in", 0);
          if (mr.has("keep")) c.mcmc.keep = mr.count("keep", 1);
          if (mr.has("thin")) c.mcmc.thin = mr.count("thin", 1);
        } catch (const ConfigError& e) {
          throw ConfigError("/mcmc" + e.path(), std::string(e.what()).substr(e.path().size() + 2));
        }
      }
      break;
    }
  }
  return c;
}

/// Parses JSON text; syntax errors become ConfigError.
inline RunConfig validate(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("JSON parse error: ") + e.what());
  }
  return parse_config(j);
}

/// Config as echoed into reports: the input with seed and problem spelled
/// out, minus output_dir and workers (which never change numeric results).
inline nlohmann::json config_echo(const RunConfig& c) {
  nlohmann::json j = c.source;
  j.erase("output_dir");
  j.erase("workers");
  j["seed"] = c.seed;
  j["problem"] = {{"name", c.problem}, {"params", c.problem_params.is_null() ? nlohmann::json::object() : c.problem_params}};
  return j;
}

}  // namespace uqmc::cli
