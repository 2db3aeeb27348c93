#include "experiment/runner.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

namespace ssls::experiment {
namespace {

namespace fs = std::filesystem;

const char* kMinimal =
    "experiment: linear_gaussian\n"
    "method: ssls\n"
    "ensemble_size: 40\n"
    "steps: 2\n"
    "seed: 3\n"
    "ssls:\n"
    "  epochs: 2\n"
    "  initial_epochs: 4\n"
    "  hidden_widths: [8]\n"
    "  temperatures: 2\n"
    "  inner_steps: 2\n";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ssls_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  static std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  fs::path dir_;
};

TEST_F(CliTest, MinimalRunWritesCsvs) {
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.output_dir = dir_;
  const auto files = run_experiment(cfg);
  ASSERT_EQ(files.size(), 3u);
  const auto traj = lines(dir_ / "trajectory.csv");
  const auto metrics = lines(dir_ / "metrics.csv");
  ASSERT_EQ(traj.size(), 3u);
  ASSERT_EQ(metrics.size(), 3u);
  EXPECT_EQ(traj[0], "k,ref_0,obs_0,mean_0,std_0");
  EXPECT_EQ(metrics[0], "k,rmse,spread,coverage,crps");
  EXPECT_EQ(traj[1].substr(0, 2), "1,");
  EXPECT_EQ(lines(dir_ / "summary.csv").size(), 2u);
}

TEST_F(CliTest, SameSeedGivesByteIdenticalFiles) {
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.output_dir = dir_ / "a";
  const auto a = run_experiment(cfg);
  cfg.output_dir = dir_ / "b";
  const auto b = run_experiment(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(slurp(a[i]), slurp(b[i])) << a[i];
}

TEST_F(CliTest, FloatsRoundTrip) {
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.output_dir = dir_;
  cfg.methods = {Method::kKalman};
  run_experiment(cfg);
  const ModelSpec model = cfg.make_model();
  const ReferenceRun run = simulate(cfg, model);
  const auto row = lines(dir_ / "trajectory.csv")[1];
  const double ref = std::stod(row.substr(row.find(',') + 1));
  EXPECT_EQ(ref, run.states[0][0]);
}

TEST_F(CliTest, KalmanOnDoubleWellIsConfigError) {
  EXPECT_THROW(parse_config("experiment: double_well_linear\nmethod: kalman\n"), ConfigError);
  ExperimentConfig cfg = default_config(ExperimentKind::kLorenz96);
  cfg.methods = {Method::kKalman};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST_F(CliTest, CompareTwoMethods) {
  ExperimentConfig cfg = parse_config(
      "experiment: linear_gaussian\nmethods: [kalman, enkf]\nensemble_size: 30\nsteps: 5\nseed: 2\n");
  cfg.output_dir = dir_;
  const auto files = compare_methods(cfg);
  ASSERT_EQ(files.size(), 3u);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f));
  const auto joined = lines(dir_ / "comparison.csv");
  ASSERT_EQ(joined.size(), 6u);
  EXPECT_EQ(joined[0],
            "k,ref_0,kalman_mean_0,kalman_std_0,kalman_rmse,kalman_spread,kalman_coverage,kalman_crps,"
            "enkf_mean_0,enkf_std_0,enkf_rmse,enkf_spread,enkf_coverage,enkf_crps");
}

TEST_F(CliTest, CompareSharesReferenceRun) {
  ExperimentConfig cfg = parse_config(
      "experiment: double_well_linear\nmethods: [apf, enkf]\nensemble_size: 30\nsteps: 4\nseed: 9\n");
  cfg.output_dir = dir_ / "cmp";
  compare_methods(cfg);
  ExperimentConfig single = cfg;
  single.methods = {Method::kApf};
  single.output_dir = dir_ / "run";
  run_experiment(single);
  const auto joined = lines(dir_ / "cmp" / "comparison.csv");
  const auto traj = lines(dir_ / "run" / "trajectory.csv");
  for (std::size_t k = 1; k < joined.size(); ++k) {
    // k and ref_0 lead both rows.
    const auto prefix = [](const std::string& s) { return s.substr(0, s.find(',', s.find(',') + 1)); };
    EXPECT_EQ(prefix(joined[k]), prefix(traj[k]));
  }
}

TEST_F(CliTest, CompareNeedsTwoMethods) {
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.output_dir = dir_;
  EXPECT_THROW(compare_methods(cfg), ConfigError);
}

TEST(Config, DiagnosticsNameLineAndField) {
  try {
    parse_config("experiment: linear_gaussian\nsteps: 3\nssls:\n  epochs: lots\n", "cfg.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "cfg.yaml:4: field 'ssls.epochs': expected an integer, got 'lots'");
  }
  try {
    parse_config("experiment: lorenz96\nmodel:\n  gamma: 0.6\n", "cfg.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "cfg.yaml:3: field 'model.gamma': unknown key");
  }
  EXPECT_THROW(parse_config("steps: 3\n"), ConfigError);
  EXPECT_THROW(parse_config("experiment: heat_equation\n"), ConfigError);
  EXPECT_THROW(parse_config("experiment: linear_gaussian\nsteps: [1\n"), ConfigError);
  EXPECT_THROW(parse_config("experiment: linear_gaussian\nensemble_size: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("experiment: linear_gaussian\nmethods: [ssls, ssls]\n"), ConfigError);
}

TEST(Config, OverridesAndDefaults) {
  const auto cfg = parse_config(
      "experiment: double_well_nonlinear\nmutation_period: 20\ninit_prior_shift: 0.5\n"
      "model:\n  gamma: 0.4\nssls:\n  clip_norm: none\n  temperatures: 4\n  activation: relu\n");
  EXPECT_EQ(cfg.ensemble_size, 1000);
  EXPECT_EQ(cfg.mutation_period, 20);
  EXPECT_EQ(cfg.double_well.measurement, MeasurementKind::kExponential);
  EXPECT_DOUBLE_EQ(cfg.double_well.sigma_obs, 0.2);
  EXPECT_DOUBLE_EQ(cfg.double_well.gamma, 0.4);
  EXPECT_FALSE(cfg.ssls.plan.clip_norm.has_value());
  EXPECT_EQ(cfg.ssls.plan.inverse_temperatures.size(), 4u);
  EXPECT_EQ(cfg.ssls.train.activation, Activation::kRelu);
  // The shift moves the guess prior only.
  const ModelSpec model = cfg.make_model();
  Stream rng(1);
  double mean = 0.0;
  for (int i = 0; i < 2000; ++i) mean += model.initial_prior_sampler(rng)[0] / 2000;
  EXPECT_NEAR(mean, -0.5, 0.02);
}

}  // namespace
}  // namespace ssls::experiment
