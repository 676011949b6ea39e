#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqmc/cli/config.hpp"
#include "uqmc/uqmc.hpp"

namespace uqmc::cli {

/// Reads one real per line; blank lines and '#' comments are skipped.
inline Dataset read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/data", "cannot open data file '" + path + "'");
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r,");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r,");
    const std::string tok = line.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) {
      throw ConfigError("/data", path + ":" + std::to_string(lineno) + ": not a finite number: '" + tok + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("/data", "data file '" + path + "' holds no values");
  return Dataset(std::move(values));
}

/// Everything a run produces before it touches the file system.
struct RunOutput {
  nlohmann::json report;
  /// Extra files: name -> contents.
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline const Model& need_model(const Problem& p) {
  if (!p.model) throw ConfigError("/problem", "problem '" + p.name + "' has no single model");
  return *p.model;
}

inline nlohmann::json report_json(const EstimateReport& r) { return r; }

inline std::string summary_line(const std::string& method, const EstimateReport& r) {
  std::ostringstream os;
  os << std::setprecision(10) << method << ": estimate " << r.estimate << ", 95% CI [" << r.ci_lo << ", " << r.ci_hi
     << "], cost " << r.total_cost();
  return os.str();
}

inline std::string samples_csv(const SampleTrace& t) {
  std::ostringstream os;
  os << "index";
  for (std::size_t k = 0; k < t.inputs.dim(); ++k) os << ",x" << k;
  os << ",output,weight\n";
  for (std::size_t i = 0; i < t.outputs.size(); ++i) {
    os << i;
    for (double v : t.inputs.row(i)) os << "," << fmt(v);
    os << "," << fmt(t.outputs[i]) << "," << fmt(t.weights[i]) << "\n";
  }
  return os.str();
}

inline RunOutput run_cv(const RunConfig& c, const Problem& p, const RngStream& rng, const Executor& exec) {
  const Model& m = need_model(p);
  if (!p.input) throw ConfigError("/problem", "problem '" + p.name + "' has no input distribution");
  if (!p.ensemble || p.ensemble->lows.empty()) {
    throw ConfigError("/problem", "problem '" + p.name + "' offers no control model");
  }
  std::size_t idx = 0;
  if (c.control) {
    bool found = false;
    for (std::size_t i = 0; i < p.ensemble->lows.size(); ++i) {
      if (p.ensemble->lows[i].id() == *c.control) {
        idx = i;
        found = true;
      }
    }
    if (!found) throw ConfigError("/control", "problem '" + p.name + "' has no model '" + *c.control + "'");
  }
  std::optional<double> gmean = c.control_mean;
  if (!gmean && idx < p.low_means.size()) gmean = p.low_means[idx];
  if (!gmean) throw ConfigError("/control_mean", "required: the control mean is not known for this problem");
  ControlVariateConfig cfg{p.ensemble->lows[idx], *gmean, c.lambda, c.pilot_n};
  SampleTrace trace;
  const auto rep = cv_estimate(m, *p.input, cfg, c.n, rng, exec, c.dump_samples ? &trace : nullptr);
  RunOutput out;
  out.report["result"] = rep;
  out.report["control"] = {{"model", cfg.control.id()}, {"mean", cfg.control_mean}};
  if (c.dump_samples) out.files.emplace_back("samples.csv", samples_csv(trace));
  out.summary = summary_line("cv", rep);
  return out;
}

inline std::string levels_csv(const std::vector<LevelStats>& levels) {
  std::ostringstream os;
  os << "level,mean,variance,cost,n\n";
  for (const auto& s : levels) {
    os << s.level << "," << fmt(s.mean) << "," << fmt(s.variance) << "," << fmt(s.cost) << "," << s.n << "\n";
  }
  return os.str();
}

inline RunOutput run_mlmc(const RunConfig& c, const Problem& p, const RngStream& rng, const Executor& exec) {
  if (!p.hierarchy) throw ConfigError("/problem", "problem '" + p.name + "' has no level hierarchy");
  MlmcOptions opts;
  opts.initial_samples = c.initial_samples;
  opts.max_level = c.max_level;
  opts.fixed_level = c.fixed_level;
  opts.max_cost = c.max_cost;
  const auto res = mlmc_estimate(*p.hierarchy, c.eps, rng, opts, exec);
  if (res.report.has_flag("bias_target_unmet")) {
    std::ostringstream os;
    os << std::setprecision(10) << "mlmc: bias target eps/sqrt(2) = " << c.eps / std::sqrt(2.0)
       << " unmet at the finest available level L = " << res.levels.size() - 1 << " (bias estimate "
       << (res.convergence ? res.convergence->bias_estimate : 0.0) << "; best estimate " << res.report.estimate
       << ")";
    throw estimator_error(os.str());
  }
  RunOutput out;
  out.report["result"] = res.report;
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& s : res.levels) {
    levels.push_back({{"level", s.level}, {"mean", s.mean}, {"variance", s.variance}, {"cost", s.cost}, {"n", s.n}});
  }
  out.report["levels"] = levels;
  out.report["plan"] = {{"eps", res.plan.eps},
                        {"L", res.levels.size() - 1},
                        {"n", res.plan.n},
                        {"xi", res.plan.xi},
                        {"predicted_cost", res.plan.predicted_cost}};
  if (res.convergence) {
    out.report["convergence"] = {{"converged", res.convergence->converged},
                                 {"alpha_hat", res.convergence->alpha},
                                 {"bias_estimate", res.convergence->bias_estimate}};
  }
  out.files.emplace_back("levels.csv", levels_csv(res.levels));
  out.summary = summary_line("mlmc", res.report) + ", L " + std::to_string(res.levels.size() - 1);
  return out;
}

inline RunOutput run_mfmc(const RunConfig& c, const Problem& p, const RngStream& rng, const Executor& exec) {
  if (!p.ensemble) throw ConfigError("/problem", "problem '" + p.name + "' has no fidelity ensemble");
  MfmcOptions opts;
  opts.pilot = c.pilot;
  const auto res = mfmc_estimate(*p.ensemble, c.budget, rng, opts, exec);
  RunOutput out;
  out.report["result"] = res.report;
  out.report["plan"] = res.plan;
  nlohmann::json pilot = res.pilot;
  nlohmann::json ids = nlohmann::json::array();
  for (std::size_t i : res.pilot.index) ids.push_back(p.ensemble->lows[i].id());
  pilot["models"] = ids;
  out.report["pilot"] = pilot;
  out.summary = summary_line("mfmc", res.report) + ", chi " + fmt(res.plan.chi);
  return out;
}

inline RunOutput run_mmmc(const RunConfig& c, const Problem& p, const RngStream& rng, const Executor& exec) {
  const Model& m = need_model(p);
  const Dataset data = c.data ? read_data_csv(*c.data) : (p.dataset ? *p.dataset : throw ConfigError(
                                                                                     "/data", "problem '" + p.name + "' has no dataset; supply 'data'"));
  MmmcOptions opts;
  opts.families = c.families;
  opts.inference = c.inference;
  opts.model_prior = c.model_prior;
  opts.evidence_samples = c.evidence_samples;
  opts.mcmc = c.mcmc;
  opts.mixture = c.mixture;
  opts.max_components_per_family = c.max_components;
  opts.ensemble_size = c.ensemble_size;
  opts.samples = c.samples;
  const auto res = uqmc::run_mmmc(m, data, opts, rng, exec);

  RunOutput out;
  out.report["result"] = res.report;
  out.report["probabilities"] = res.probabilities;
  nlohmann::json posts = nlohmann::json::array();
  for (const auto& [f, post] : res.posteriors) posts.push_back(posterior_summary(post));
  out.report["posteriors"] = posts;
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& [f, w] : mixture_family_weights(res.probabilities, res.posteriors, opts.mixture)) {
    fams.push_back({{"family", family_name(f)}, {"weight", w}, {"components", res.posteriors.at(f).samples.size()}});
  }
  out.report["mixture"] = {{"mode", mixture_mode_name(opts.mixture)},
                           {"components", res.mixture.size()},
                           {"families", fams},
                           {"normalized", res.mixture.normalized()}};
  out.report["data"] = {{"n", data.size()}, {"source", c.data ? c.source.value("data", *c.data) : p.name}};
  if (c.dump_estimates) {
    std::ostringstream os;
    os << "index,family,param0,param1,estimate,std_error,ess\n";
    for (std::size_t j = 0; j < res.candidates.size(); ++j) {
      const auto& d = res.candidates.entries[j];
      os << j << "," << family_name(d.family()) << "," << fmt(d.param(0)) << "," << fmt(d.param(1)) << ","
         << fmt(res.report.estimates[j]) << "," << fmt(res.report.std_errors[j]) << "," << fmt(res.report.ess[j])
         << "\n";
    }
    out.files.emplace_back("estimates.csv", os.str());
  }
  std::ostringstream os;
  os << std::setprecision(10) << "mmmc: median estimate " << res.report.quantiles[2] << ", 90% band ["
     << res.report.quantiles[0] << ", " << res.report.quantiles[4] << "], " << res.report.ledger.total_evaluations()
     << " model evaluations for " << res.candidates.size() << " candidate models";
  out.summary = os.str();
  return out;
}

}  // namespace detail

/// Executes a configuration in memory.
inline RunOutput execute(const RunConfig& c) {
  Problem p = [&] {
    try {
      return builtin_problem(c.problem, c.problem_params);
    } catch (const uqmc::invalid_argument& e) {
      throw ConfigError("/problem", e.what());
    }
  }();
  const RngStream rng{c.seed, 0, 0};
  const Executor exec{c.workers};
  RunOutput out;
  switch (c.method) {
    case RunMethod::mc: {
      const Model& m = detail::need_model(p);
      if (!p.input) throw ConfigError("/problem", "problem '" + p.name + "' has no input distribution");
      SampleTrace trace;
      const auto rep = mc_estimate(m, *p.input, c.n, rng, exec, c.dump_samples ? &trace : nullptr);
      out.report["result"] = rep;
      if (c.dump_samples) out.files.emplace_back("samples.csv", detail::samples_csv(trace));
      out.summary = detail::summary_line("mc", rep);
      break;
    }
    case RunMethod::cv:
      out = detail::run_cv(c, p, rng, exec);
      break;
    case RunMethod::two_level: {
      if (!p.hierarchy) throw ConfigError("/problem", "problem '" + p.name + "' has no level hierarchy");
      if (c.levels[1] >= p.hierarchy->size()) throw ConfigError("/levels", "fine level is outside the hierarchy");
      TwoLevelOptions opts;
      opts.pilot = c.pilot;
      opts.coarse_level = c.levels[0];
      opts.fine_level = c.levels[1];
      const auto rep = two_level_estimate(*p.hierarchy, c.budget, rng, opts, exec);
      out.report["result"] = rep;
      out.summary = detail::summary_line("two_level", rep);
      break;
    }
    case RunMethod::mlmc:
      out = detail::run_mlmc(c, p, rng, exec);
      break;
    case RunMethod::mfmc:
      out = detail::run_mfmc(c, p, rng, exec);
      break;
    case RunMethod::mmmc:
      out = detail::run_mmmc(c, p, rng, exec);
      break;
  }
  nlohmann::json full = {{"uqmc_version", kVersion}, {"method", method_string(c.method)}, {"config", config_echo(c)}};
  full.update(out.report);
  out.report = std::move(full);
  return out;
}

/// Writes report.json, extra files and run_info.json into the output
/// directory. Files already written are removed if a later write fails.
inline void write_outputs(const RunConfig& c, const RunOutput& out, double wall_seconds) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("/output_dir", "cannot create '" + c.output_dir + "': " + ec.message());
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const fs::path target = dir / name;
    std::ofstream f(target, std::ios::binary | std::ios::trunc);
    if (f) f << text;
    if (!f) {
      for (const auto& w : written) fs::remove(w, ec);
      throw ConfigError("/output_dir", "cannot write '" + target.string() + "'");
    }
    written.push_back(target);
  };
  put("report.json", out.report.dump(2) + "\n");
  for (const auto& [name, text] : out.files) put(name, text);
  const nlohmann::json info = {{"uqmc_version", kVersion},
                               {"wall_seconds", wall_seconds},
                               {"workers", c.workers},
                               {"output_dir", c.output_dir}};
  put("run_info.json", info.dump(2) + "\n");
}

/// Removes files a run may have left behind in its output directory.
inline void remove_outputs(const RunConfig& c) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* name : {"report.json", "levels.csv", "samples.csv", "estimates.csv", "run_info.json"}) {
    fs::remove(fs::path(c.output_dir) / name, ec);
  }
}

/// Exit status for an exception escaping a run.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const uqmc::invalid_argument*>(&e)) return 2;
  if (dynamic_cast<const estimator_error*>(&e)) return 3;
  if (dynamic_cast<const numeric_error*>(&e)) return 4;
  return 1;
}

}  // namespace uqmc::cli
