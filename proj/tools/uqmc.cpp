// uqmc: run Monte Carlo estimators from a JSON configuration.
//
//   uqmc run <config.json> [--seed N] [--workers W] [--out DIR]
//   uqmc validate <config.json>
//
// Exit status: 0 success, 2 configuration error, 3 estimator failure,
// 4 numeric failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "uqmc/cli/config.hpp"
#include "uqmc/cli/run.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw uqmc::cli::ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uqmc: multilevel, multifidelity and multimodel Monte Carlo"};
  app.set_version_flag("--version", std::string(uqmc::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out_dir;
  auto* run = app.add_subcommand("run", "execute a configuration and write report.json");
  run->add_option("config", config_path, "JSON configuration file")->required();
  run->add_option("--seed", seed, "override the configured seed");
  run->add_option("--workers", workers, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory");

  std::string validate_path;
  auto* val = app.add_subcommand("validate", "check a configuration without running it");
  val->add_option("config", validate_path, "JSON configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*val) {
    try {
      const auto c = uqmc::cli::validate(slurp(validate_path));
      std::cout << "valid " << uqmc::cli::method_string(c.method) << " configuration (seed " << c.seed << ")\n";
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return uqmc::cli::exit_code_for(e);
    }
  }

  uqmc::cli::RunConfig cfg;
  try {
    cfg = uqmc::cli::validate(slurp(config_path));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return uqmc::cli::exit_code_for(e);
  }
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  if (out_dir) cfg.output_dir = *out_dir;
  if (cfg.data && std::filesystem::path(*cfg.data).is_relative()) {
    cfg.data = (std::filesystem::path(config_path).parent_path() / *cfg.data).string();
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const auto out = uqmc::cli::execute(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    uqmc::cli::write_outputs(cfg, out, wall);
    std::cout << out.summary << "\n";
    return 0;
  } catch (const std::exception& e) {
    uqmc::cli::remove_outputs(cfg);
    const int rc = uqmc::cli::exit_code_for(e);
    const char* kind = rc == 2 ? "config error" : rc == 3 ? "estimator error" : rc == 4 ? "numeric error" : "error";
    std::cerr << kind << ": " << e.what() << "\n";
    return rc;
  }
}
