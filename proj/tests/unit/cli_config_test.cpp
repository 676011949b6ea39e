#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "uqmc/cli/config.hpp"
#include "uqmc/cli/run.hpp"

using namespace uqmc;
using namespace uqmc::cli;

namespace {

std::string error_path(const std::string& text) {
  try {
    validate(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

std::string error_message(const std::string& text) {
  try {
    validate(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesMinimalMc) {
  const auto c = validate(R"({"method": "mc", "problem": "quadratic", "n": 100, "seed": 7})");
  EXPECT_EQ(c.method, RunMethod::mc);
  EXPECT_EQ(c.problem, "quadratic");
  EXPECT_EQ(c.n, 100u);
  EXPECT_EQ(c.seed, 7u);
}

TEST(Config, ProblemObjectWithParams) {
  const auto c = validate(R"({"method": "mlmc", "problem": {"name": "gbm_euler", "params": {"max_level": 4}},
                              "eps": 0.05})");
  EXPECT_EQ(c.problem, "gbm_euler");
  EXPECT_EQ(c.problem_params["max_level"], 4);
  EXPECT_EQ(error_path(R"({"method": "mlmc", "problem": {"name": "gbm_euler", "parms": {}}, "eps": 0.05})"),
            "/problem/parms");
}

TEST(Config, UnknownKeySuggestsNearest) {
  const auto text = R"({"method": "mc", "problem": "quadratic", "n": 10, "sed": 3})";
  EXPECT_EQ(error_path(text), "/sed");
  EXPECT_NE(error_message(text).find("did you mean 'seed'"), std::string::npos);
  EXPECT_NE(error_message(R"({"method": "mlcm", "problem": "quadratic"})").find("'mlmc'"), std::string::npos);
}

TEST(Config, MissingRequiredKeyNamed) {
  EXPECT_EQ(error_path(R"({"method": "mfmc", "problem": "poly_fidelity"})"), "/budget");
  EXPECT_EQ(error_path(R"({"method": "mc", "n": 10})"), "/problem");
  EXPECT_EQ(error_path(R"({"problem": "quadratic"})"), "/method");
}

TEST(Config, TypeErrors) {
  EXPECT_EQ(error_path(R"({"method": "mc", "problem": "quadratic", "n": 10.5})"), "/n");
  EXPECT_EQ(error_path(R"({"method": "mc", "problem": "quadratic", "n": 10, "seed": -1})"), "/seed");
  EXPECT_EQ(error_path(R"({"method": "mlmc", "problem": "gbm_euler", "eps": 0})"), "/eps");
  EXPECT_EQ(error_path(R"({"method": "two_level", "problem": "gbm_euler", "budget": 1e4, "levels": [2, 1]})"),
            "/levels");
  EXPECT_EQ(error_path(R"({"method": "mmmc", "families": ["Normal", "Gama"]})"), "/families/1");
  EXPECT_EQ(error_path(R"({"method": "mmmc", "mcmc": {"burnin": 10}})"), "/mcmc/burnin");
  EXPECT_EQ(error_path(R"({"method": "mmmc", "mcmc": {"keep": 0}})"), "/mcmc/keep");
  EXPECT_EQ(error_path("{not json"), "");
}

TEST(Config, MmmcDefaults) {
  const auto c = validate(R"({"method": "mmmc"})");
  EXPECT_EQ(c.problem, "smalldata_demo");
  EXPECT_EQ(c.families.size(), 4u);
  EXPECT_EQ(c.mixture, MixtureMode::weighted);
  EXPECT_EQ(c.inference, InferenceMethod::aic);
}

TEST(Config, EchoDropsRunOnlyFields) {
  const auto c = validate(R"({"method": "mc", "problem": "quadratic", "n": 10, "workers": 4, "output_dir": "x"})");
  const auto j = config_echo(c);
  EXPECT_FALSE(j.contains("workers"));
  EXPECT_FALSE(j.contains("output_dir"));
  EXPECT_EQ(j["seed"], 0);
  EXPECT_EQ(j["problem"]["name"], "quadratic");
}

TEST(Execute, ReportIndependentOfWorkers) {
  auto c = validate(R"({"method": "mfmc", "problem": "poly_fidelity", "budget": 2000, "seed": 3})");
  const auto a = execute(c);
  c.workers = 4;
  const auto b = execute(c);
  EXPECT_EQ(a.report.dump(), b.report.dump());
  EXPECT_EQ(a.report["method"], "mfmc");
  EXPECT_TRUE(a.report.contains("plan"));
}

TEST(Execute, UnknownProblemIsConfigError) {
  const auto c = validate(R"({"method": "mc", "problem": "quadratc", "n": 10})");
  EXPECT_THROW(execute(c), ConfigError);
}

TEST(Execute, ExitCodes) {
  EXPECT_EQ(exit_code_for(ConfigError("/x", "bad")), 2);
  EXPECT_EQ(exit_code_for(uqmc::invalid_argument("bad")), 2);
  EXPECT_EQ(exit_code_for(estimator_error("bad")), 3);
  EXPECT_EQ(exit_code_for(numeric_error("bad")), 4);
}

TEST(DataCsv, SkipsCommentsAndRejectsGarbage) {
  const auto dir = std::filesystem::temp_directory_path() / "uqmc_csv_test";
  std::filesystem::create_directories(dir);
  const auto good = dir / "good.csv";
  std::ofstream(good) << "# header\n1.5\n\n2.5 # trailing\n3\n";
  const auto d = read_data_csv(good.string());
  EXPECT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(d.values()[1], 2.5);
  const auto bad = dir / "bad.csv";
  std::ofstream(bad) << "1.0\nabc\n";
  EXPECT_THROW(read_data_csv(bad.string()), ConfigError);
  EXPECT_THROW(read_data_csv((dir / "missing.csv").string()), ConfigError);
  std::filesystem::remove_all(dir);
}
