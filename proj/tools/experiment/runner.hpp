#pragma once

#include "config.hpp"

#include "ssls/record.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace ssls::experiment {

/// The experiment's reference trajectory; depends only on the config's
/// model parameters, steps, mutation period and seed.
ReferenceRun simulate(const ExperimentConfig& config, const ModelSpec& model);

/// Runs one filter over an existing reference run.
std::vector<AssimilationRecord> run_method(const ExperimentConfig& config, const ModelSpec& model,
                                           const ReferenceRun& run, Method method);

/// k, ref_j, obs_j, mean_j, std_j (j zero-based).
void write_trajectory_csv(std::ostream& out, std::span<const AssimilationRecord> records);
/// k, rmse, spread, coverage, crps.
void write_metrics_csv(std::ostream& out, std::span<const AssimilationRecord> records);

struct MethodRecords {
  Method method;
  std::vector<AssimilationRecord> records;
};

/// method, experiment, ensemble_size, steps, seed, rmse, spread, coverage, crps.
void write_summary_csv(std::ostream& out, const ExperimentConfig& config, std::span<const MethodRecords> results);
/// k, ref_j, then per method <m>_mean_j, <m>_std_j, <m>_rmse, <m>_spread, <m>_coverage, <m>_crps.
void write_comparison_csv(std::ostream& out, std::span<const MethodRecords> results);

/// Single method: trajectory.csv, metrics.csv and summary.csv in output_dir.
/// Returns the files written.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config);

/// Two or more methods on a shared reference run: metrics_<method>.csv for
/// each plus comparison.csv. Returns the files written.
std::vector<std::filesystem::path> compare_methods(const ExperimentConfig& config);

}  // namespace ssls::experiment
