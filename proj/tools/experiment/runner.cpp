#include "runner.hpp"

#include "ssls/baselines.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace ssls::experiment {

namespace {

// 17 significant digits round-trips every double.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void vector_header(std::ostream& out, const std::string& prefix, Index d) {
  for (Index j = 0; j < d; ++j) out << ',' << prefix << '_' << j;
}

void vector_values(std::ostream& out, const Vector& v) {
  for (Index j = 0; j < v.size(); ++j) out << ',' << num(v[j]);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

Vector guess_mean(const ExperimentConfig& config) {
  const auto& p = config.linear_gaussian;
  return Vector::Constant(1, p.prior_mean + p.guess_shift + config.init_prior_shift);
}

}  // namespace

ReferenceRun simulate(const ExperimentConfig& config, const ModelSpec& model) {
  Stream rng = Stream::derive(config.seed, StreamTag::kReference);
  return simulate_reference(model, config.steps, config.mutation_period, rng);
}

std::vector<AssimilationRecord> run_method(const ExperimentConfig& config, const ModelSpec& model,
                                           const ReferenceRun& run, Method method) {
  BaselineConfig base;
  base.ensemble_size = config.ensemble_size;
  base.seed = config.seed;
  base.keep_snapshots = config.keep_snapshots;
  base.threads = config.threads;
  switch (method) {
    case Method::kSsls:
      return assimilate(model, run, config.ssls_config());
    case Method::kEnkf:
      return run_enkf(model, run, base);
    case Method::kApf:
      return run_apf(model, run, base);
    case Method::kKalman:
      return run_kalman(model, run, guess_mean(config));
  }
  throw ConfigError("unknown method");
}

void write_trajectory_csv(std::ostream& out, std::span<const AssimilationRecord> records) {
  if (records.empty()) return;
  const Index d = records.front().reference.size();
  const Index p = records.front().observation.size();
  out << 'k';
  vector_header(out, "ref", d);
  vector_header(out, "obs", p);
  vector_header(out, "mean", d);
  vector_header(out, "std", d);
  out << '\n';
  for (const auto& r : records) {
    out << r.k;
    vector_values(out, r.reference);
    vector_values(out, r.observation);
    vector_values(out, r.mean);
    vector_values(out, r.std);
    out << '\n';
  }
}

void write_metrics_csv(std::ostream& out, std::span<const AssimilationRecord> records) {
  out << "k,rmse,spread,coverage,crps\n";
  for (const auto& r : records) {
    const auto& m = r.metrics;
    out << r.k << ',' << num(m.rmse) << ',' << num(m.spread) << ',' << num(m.coverage) << ',' << num(m.crps) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const ExperimentConfig& config, std::span<const MethodRecords> results) {
  out << "method,experiment,ensemble_size,steps,seed,rmse,spread,coverage,crps\n";
  for (const auto& res : results) {
    std::vector<MetricRow> rows;
    for (const auto& r : res.records) rows.push_back(r.metrics);
    const MetricRow avg = time_average(rows);
    const Index n = res.method == Method::kKalman ? 0 : config.ensemble_size;
    out << to_string(res.method) << ',' << to_string(config.experiment) << ',' << n << ',' << config.steps << ','
        << config.seed << ',' << num(avg.rmse) << ',' << num(avg.spread) << ',' << num(avg.coverage) << ','
        << num(avg.crps) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, std::span<const MethodRecords> results) {
  if (results.empty() || results.front().records.empty()) return;
  const auto& first = results.front().records;
  const Index d = first.front().reference.size();
  out << 'k';
  vector_header(out, "ref", d);
  for (const auto& res : results) {
    const std::string m = to_string(res.method);
    vector_header(out, m + "_mean", d);
    vector_header(out, m + "_std", d);
    out << ',' << m << "_rmse," << m << "_spread," << m << "_coverage," << m << "_crps";
  }
  out << '\n';
  for (std::size_t i = 0; i < first.size(); ++i) {
    out << first[i].k;
    vector_values(out, first[i].reference);
    for (const auto& res : results) {
      const auto& r = res.records[i];
      vector_values(out, r.mean);
      vector_values(out, r.std);
      out << ',' << num(r.metrics.rmse) << ',' << num(r.metrics.spread) << ',' << num(r.metrics.coverage) << ','
          << num(r.metrics.crps);
    }
    out << '\n';
  }
}

std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.methods.size() != 1) {
    throw ConfigError("run takes exactly one method, got " + std::to_string(config.methods.size()) +
                      "; use compare for several");
  }
  const ModelSpec model = config.make_model();
  const ReferenceRun run = simulate(config, model);
  const std::vector<MethodRecords> results{{config.methods.front(), run_method(config, model, run, config.methods.front())}};

  std::filesystem::create_directories(config.output_dir);
  const auto traj = config.output_dir / "trajectory.csv";
  const auto metrics = config.output_dir / "metrics.csv";
  const auto summary = config.output_dir / "summary.csv";
  {
    auto out = open_csv(traj);
    write_trajectory_csv(out, results.front().records);
  }
  {
    auto out = open_csv(metrics);
    write_metrics_csv(out, results.front().records);
  }
  {
    auto out = open_csv(summary);
    write_summary_csv(out, config, results);
  }
  return {traj, metrics, summary};
}

std::vector<std::filesystem::path> compare_methods(const ExperimentConfig& config) {
  config.validate();
  if (config.methods.size() < 2) throw ConfigError("compare needs at least two methods in 'methods'");
  const ModelSpec model = config.make_model();
  const ReferenceRun run = simulate(config, model);
  std::vector<MethodRecords> results;
  for (Method m : config.methods) results.push_back({m, run_method(config, model, run, m)});

  std::filesystem::create_directories(config.output_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& res : results) {
    const auto path = config.output_dir / ("metrics_" + to_string(res.method) + ".csv");
    auto out = open_csv(path);
    write_metrics_csv(out, res.records);
    written.push_back(path);
  }
  const auto joined = config.output_dir / "comparison.csv";
  auto out = open_csv(joined);
  write_comparison_csv(out, results);
  written.push_back(joined);
  return written;
}

}  // namespace ssls::experiment
