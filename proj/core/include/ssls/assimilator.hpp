#pragma once

#include "ssls/models.hpp"
#include "ssls/record.hpp"
#include "ssls/sampler.hpp"
#include "ssls/score_net.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ssls {

struct SslsConfig {
  Index ensemble_size = 500;
  TrainConfig train;
  /// Epochs for the cold-start fit at the first step; 0 means train.epochs.
  int initial_epochs = 0;
  AnnealPlan plan;
  std::uint64_t seed = 0;
  bool keep_snapshots = false;
  int threads = 1;

  void validate() const;
};

/// Draws n particles from the model's guess prior, one substream per particle.
Ensemble sample_initial_prior(const ModelSpec& model, Index n, std::uint64_t seed);

/// Propagates each particle through the dynamics with its own noise draw.
Ensemble predict(const Ensemble& posterior, const ModelSpec& model, std::uint64_t seed, std::uint64_t time_step,
                 int threads = 1);

/// Runs annealed Langevin sampling toward g(y|x) * exp(score potential).
Ensemble langevin_update(const Ensemble& predicted, const ScoreNetwork& score, const ModelSpec& model,
                         const Vector& observation, const AnnealPlan& plan, std::uint64_t seed,
                         std::uint64_t time_step, int threads = 1);

/// Sequential score-based Langevin filter. Holds the last trained score
/// network so each step can warm-start from the previous one.
class SslsFilter {
 public:
  SslsFilter(const ModelSpec& model, SslsConfig config);

  /// Learns the prior score from `prior_samples` and samples the first posterior.
  const Ensemble& initialize(const Ensemble& prior_samples, const Vector& observation);
  /// Prediction, score matching on the predicted ensemble, annealed update.
  const Ensemble& advance(const Vector& observation);

  const Ensemble& posterior() const { return posterior_; }
  const std::optional<ScoreNetwork>& score_network() const { return network_; }
  int time_step() const { return time_step_; }

 private:
  const Ensemble& update(const Ensemble& predicted, const Vector& observation, int epochs);

  const ModelSpec& model_;
  SslsConfig config_;
  Ensemble posterior_;
  std::optional<ScoreNetwork> network_;
  int time_step_ = 0;
};

/// Initial-step update: fit the prior score on `prior_samples`, then ALMC
/// with the first likelihood.
Ensemble initial_update(const Ensemble& prior_samples, const ModelSpec& model, const Vector& observation,
                        const SslsConfig& config);

/// Full filter over a reference run; one record per observation.
std::vector<AssimilationRecord> assimilate(const ModelSpec& model, const ReferenceRun& run, const SslsConfig& config);

}  // namespace ssls
