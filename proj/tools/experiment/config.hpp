#pragma once

#include "ssls/assimilator.hpp"
#include "ssls/models.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssls::experiment {

enum class ExperimentKind { kLinearGaussian, kDoubleWellLinear, kDoubleWellNonlinear, kLorenz96 };
enum class Method { kSsls, kEnkf, kApf, kKalman };

std::string to_string(ExperimentKind kind);
std::string to_string(Method method);

/// Raised for unreadable, malformed or inconsistent configuration. The
/// message carries the file, line and field when they are known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kLinearGaussian;
  std::vector<Method> methods;
  Index ensemble_size = 0;
  int steps = 10;
  std::optional<int> mutation_period;
  std::uint64_t seed = 0;
  int threads = 1;
  bool keep_snapshots = false;
  std::filesystem::path output_dir = "out";
  /// Added to the guess prior mean (every component).
  double init_prior_shift = 0.0;

  LinearGaussianParams linear_gaussian;
  DoubleWellParams double_well;
  Lorenz96Params lorenz96;
  SslsConfig ssls;

  /// Model with init_prior_shift applied to the guess sampler.
  ModelSpec make_model() const;
  /// SslsConfig with ensemble size, seed, threads and snapshots filled in.
  SslsConfig ssls_config() const;
  /// Checks cross-field constraints; throws ConfigError.
  void validate() const;
};

/// Defaults for an experiment before any user overrides are applied.
ExperimentConfig default_config(ExperimentKind kind);

/// Parses YAML text. `source` names the origin in diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace ssls::experiment
