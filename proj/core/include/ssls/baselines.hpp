#pragma once

#include "ssls/models.hpp"
#include "ssls/record.hpp"
#include "ssls/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ssls {

// ---------------------------------------------------------------------------
// Kalman filter
// ---------------------------------------------------------------------------

struct GaussianState {
  Vector mean;
  Matrix cov;
};

GaussianState kalman_predict(const GaussianState& state, const LinearGaussianSpec& spec);
/// Throws SingularCovariance when H P H^T + R cannot be factorized.
GaussianState kalman_update(const GaussianState& prior, const LinearGaussianSpec& spec, const Vector& y);
/// Predict then update.
GaussianState kalman_step(const GaussianState& state, const LinearGaussianSpec& spec, const Vector& y);

/// Posterior after each observation; the first is an update of N(m0, P0).
std::vector<GaussianState> kalman_filter(const LinearGaussianSpec& spec, std::span<const Vector> observations);

// ---------------------------------------------------------------------------
// Ensemble Kalman filter (stochastic, perturbed observations)
// ---------------------------------------------------------------------------

/// Analysis of a forecast ensemble with observation `y`; observation i is
/// perturbed by its own N(0, R) draw.
Ensemble enkf_analysis(const Ensemble& forecast, const ModelSpec& model, const Vector& y, std::uint64_t seed,
                       std::uint64_t time_step);

/// Forecast through the dynamics, then analysis.
Ensemble enkf_step(const Ensemble& ensemble, const ModelSpec& model, const Vector& y, std::uint64_t seed,
                   std::uint64_t time_step, int threads = 1);

// ---------------------------------------------------------------------------
// Auxiliary particle filter
// ---------------------------------------------------------------------------

struct WeightedParticles {
  Ensemble particles;
  std::vector<double> weights;

  /// Builds normalized weights from log-weights; falls back to uniform when
  /// every weight is zero or non-finite and sets `degenerate`.
  static WeightedParticles from_log_weights(Ensemble particles, std::span<const double> log_weights,
                                            bool* degenerate = nullptr);
};

/// n ancestor indices with a single offset u ~ U[0, 1/n).
std::vector<Index> systematic_resample(std::span<const double> weights, Index n, Stream& rng);

struct ApfResult {
  Ensemble particles;
  /// True when likelihood underflow forced uniform weights.
  bool degenerate = false;
};

/// Importance-weights prior samples by g(y|x) and resamples.
ApfResult apf_initial(const Ensemble& prior, const ModelSpec& model, const Vector& y, std::uint64_t seed);

/// One auxiliary particle filter step from equally weighted particles:
/// look-ahead weights at the noiseless prediction, auxiliary resampling,
/// propagation, second-stage reweighting and final systematic resampling.
ApfResult apf_step(const Ensemble& particles, const ModelSpec& model, const Vector& y, std::uint64_t seed,
                   std::uint64_t time_step, int threads = 1);

// ---------------------------------------------------------------------------
// Whole-run drivers, sharing the record format with the SSLS assimilator.
// ---------------------------------------------------------------------------

struct BaselineConfig {
  Index ensemble_size = 1000;
  std::uint64_t seed = 0;
  bool keep_snapshots = false;
  int threads = 1;
};

std::vector<AssimilationRecord> run_enkf(const ModelSpec& model, const ReferenceRun& run, const BaselineConfig& config);
std::vector<AssimilationRecord> run_apf(const ModelSpec& model, const ReferenceRun& run, const BaselineConfig& config);
/// Requires model.linear. The filter starts from the model's guess prior
/// mean with the true prior covariance.
std::vector<AssimilationRecord> run_kalman(const ModelSpec& model, const ReferenceRun& run,
                                           const Vector& initial_mean);

}  // namespace ssls
