#include "experiment/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace ssls::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Score-based sequential Langevin sampling experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "YAML experiment config")->required();
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--out", out_dir, "override the output directory");
  };
  CLI::App* run = app.add_subcommand("run", "run one method and write trajectory/metrics/summary CSVs");
  CLI::App* compare = app.add_subcommand("compare", "run several methods on a shared reference trajectory");
  add_common(run);
  add_common(compare);

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    const auto files = run->parsed() ? run_experiment(config) : compare_methods(config);
    for (const auto& f : files) std::cout << f.string() << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
