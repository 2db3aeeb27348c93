#include "ssls/baselines.hpp"

#include "ssls/assimilator.hpp"
#include "ssls/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ssls {

namespace {

constexpr double kInnovationJitter = 1e-10;

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix observation_cov(const ModelSpec& model) {
  return model.obs_noise_std.array().square().matrix().asDiagonal();
}

Ensemble resample_rows(const Ensemble& particles, std::span<const Index> ancestors) {
  Ensemble out(static_cast<Index>(ancestors.size()), particles.cols());
  for (std::size_t i = 0; i < ancestors.size(); ++i) out.row(static_cast<Index>(i)) = particles.row(ancestors[i]);
  return out;
}

}  // namespace

GaussianState kalman_predict(const GaussianState& state, const LinearGaussianSpec& spec) {
  require_dim(state.mean.size(), spec.state_dim(), "kalman_predict: mean");
  GaussianState out;
  out.mean = spec.transition * state.mean;
  out.cov = symmetrize(spec.transition * state.cov * spec.transition.transpose() + spec.process_cov);
  return out;
}

GaussianState kalman_update(const GaussianState& prior, const LinearGaussianSpec& spec, const Vector& y) {
  require_dim(prior.mean.size(), spec.state_dim(), "kalman_update: mean");
  require_dim(y.size(), spec.obs_dim(), "kalman_update: observation");
  const Matrix& H = spec.observation;
  const Matrix innovation_cov = symmetrize(H * prior.cov * H.transpose() + spec.observation_cov);
  Eigen::LDLT<Matrix> ldlt(innovation_cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularCovariance("kalman_update: singular innovation covariance");
  }
  const Matrix gain = ldlt.solve(H * prior.cov).transpose();  // P H^T S^{-1}
  GaussianState post;
  post.mean = prior.mean + gain * (y - H * prior.mean);
  const Matrix I = Matrix::Identity(prior.cov.rows(), prior.cov.cols());
  post.cov = symmetrize((I - gain * H) * prior.cov);
  return post;
}

GaussianState kalman_step(const GaussianState& state, const LinearGaussianSpec& spec, const Vector& y) {
  return kalman_update(kalman_predict(state, spec), spec, y);
}

std::vector<GaussianState> kalman_filter(const LinearGaussianSpec& spec, std::span<const Vector> observations) {
  spec.validate();
  std::vector<GaussianState> out;
  out.reserve(observations.size());
  GaussianState state{spec.initial_mean, spec.initial_cov};
  for (std::size_t k = 0; k < observations.size(); ++k) {
    state = (k == 0) ? kalman_update(state, spec, observations[k]) : kalman_step(state, spec, observations[k]);
    out.push_back(state);
  }
  return out;
}

Ensemble enkf_analysis(const Ensemble& forecast, const ModelSpec& model, const Vector& y, std::uint64_t seed,
                       std::uint64_t time_step) {
  const Index n = forecast.rows();
  require(n >= 2, "enkf_analysis: ensemble needs at least 2 members");
  require_dim(forecast.cols(), model.state_dim, "enkf_analysis: ensemble");
  require_dim(y.size(), model.obs_dim, "enkf_analysis: observation");

  const Index p = model.obs_dim;
  Matrix predicted_obs(n, p);
  for (Index i = 0; i < n; ++i) predicted_obs.row(i) = model.measurement(forecast.row(i).transpose()).transpose();

  const Vector x_mean = forecast.colwise().mean().transpose();
  const Vector h_mean = predicted_obs.colwise().mean().transpose();
  const Matrix x_anom = forecast.rowwise() - x_mean.transpose();
  const Matrix h_anom = predicted_obs.rowwise() - h_mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const Matrix cross_cov = x_anom.transpose() * h_anom / denom;
  Matrix innovation_cov = h_anom.transpose() * h_anom / denom + observation_cov(model);
  innovation_cov.diagonal().array() += kInnovationJitter;

  Eigen::LDLT<Matrix> ldlt(symmetrize(innovation_cov));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularCovariance("enkf_analysis: singular innovation covariance at time step " + std::to_string(time_step));
  }
  const Matrix gain = ldlt.solve(cross_cov.transpose()).transpose();  // C_xh S^{-1}

  Ensemble analysis(n, forecast.cols());
  for (Index i = 0; i < n; ++i) {
    Stream rng = Stream::derive(seed, StreamTag::kEnkf, time_step, static_cast<std::uint64_t>(i));
    Vector innovation = y - predicted_obs.row(i).transpose();
    for (Index j = 0; j < p; ++j) innovation[j] += model.obs_noise_std[j] * rng.normal();
    analysis.row(i) = forecast.row(i) + (gain * innovation).transpose();
  }
  return analysis;
}

Ensemble enkf_step(const Ensemble& ensemble, const ModelSpec& model, const Vector& y, std::uint64_t seed,
                   std::uint64_t time_step, int threads) {
  const Ensemble forecast = predict(ensemble, model, seed, time_step, threads);
  return enkf_analysis(forecast, model, y, seed, time_step + 1);
}

WeightedParticles WeightedParticles::from_log_weights(Ensemble particles, std::span<const double> log_weights,
                                                      bool* degenerate) {
  require(static_cast<Index>(log_weights.size()) == particles.rows(), "WeightedParticles: one weight per particle");
  WeightedParticles out;
  out.particles = std::move(particles);
  const std::size_t n = log_weights.size();
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights)
    if (std::isfinite(lw)) max_lw = std::max(max_lw, lw);
  out.weights.assign(n, 0.0);
  double total = 0.0;
  if (std::isfinite(max_lw)) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - max_lw) : 0.0;
      out.weights[i] = w;
      total += w;
    }
  }
  const bool fallback = !(total > 0.0) || !std::isfinite(total);
  if (fallback) {
    std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(n));
  } else {
    for (double& w : out.weights) w /= total;
  }
  if (degenerate) *degenerate = fallback;
  return out;
}

std::vector<Index> systematic_resample(std::span<const double> weights, Index n, Stream& rng) {
  require(!weights.empty(), "systematic_resample: empty weights");
  require(n >= 1, "systematic_resample: n must be positive");
  const double step = 1.0 / static_cast<double>(n);
  const double u = rng.uniform() * step;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n));
  double cumulative = weights[0];
  std::size_t j = 0;
  for (Index i = 0; i < n; ++i) {
    const double point = u + static_cast<double>(i) * step;
    while (point >= cumulative && j + 1 < weights.size()) cumulative += weights[++j];
    out.push_back(static_cast<Index>(j));
  }
  return out;
}

ApfResult apf_initial(const Ensemble& prior, const ModelSpec& model, const Vector& y, std::uint64_t seed) {
  require(prior.rows() >= 1, "apf_initial: empty ensemble");
  std::vector<double> log_w(static_cast<std::size_t>(prior.rows()));
  for (Index i = 0; i < prior.rows(); ++i) log_w[static_cast<std::size_t>(i)] = model.log_likelihood(prior.row(i).transpose(), y);
  ApfResult result;
  const auto wp = WeightedParticles::from_log_weights(prior, log_w, &result.degenerate);
  Stream rng = Stream::derive(seed, StreamTag::kResample, 0, 1);
  const auto idx = systematic_resample(wp.weights, prior.rows(), rng);
  result.particles = resample_rows(prior, idx);
  return result;
}

ApfResult apf_step(const Ensemble& particles, const ModelSpec& model, const Vector& y, std::uint64_t seed,
                   std::uint64_t time_step, int threads) {
  const Index n = particles.rows();
  require(n >= 1, "apf_step: empty ensemble");
  require_dim(particles.cols(), model.state_dim, "apf_step: particles");
  const Vector zero = model.zero_noise();

  // First stage: look-ahead weights at the noiseless prediction.
  Ensemble look_ahead(n, particles.cols());
  std::vector<double> first_log_w(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](Index i) {
    const Vector mu = model.dynamics(particles.row(i).transpose(), zero);
    look_ahead.row(i) = mu.transpose();
    first_log_w[static_cast<std::size_t>(i)] = model.log_likelihood(mu, y);
  });
  ApfResult result;
  bool first_degenerate = false;
  const auto first = WeightedParticles::from_log_weights(look_ahead, first_log_w, &first_degenerate);
  Stream aux_rng = Stream::derive(seed, StreamTag::kResample, time_step, 0);
  const auto ancestors = systematic_resample(first.weights, n, aux_rng);

  // Propagate the selected ancestors and correct for the look-ahead.
  Ensemble propagated(n, particles.cols());
  std::vector<double> second_log_w(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](Index i) {
    const Index a = ancestors[static_cast<std::size_t>(i)];
    Stream rng = Stream::derive(seed, StreamTag::kApf, time_step, static_cast<std::uint64_t>(i));
    const Vector x = model.dynamics(particles.row(a).transpose(), model.dynamics_noise_sampler(rng));
    propagated.row(i) = x.transpose();
    const double corr = first_degenerate ? 0.0 : first_log_w[static_cast<std::size_t>(a)];
    second_log_w[static_cast<std::size_t>(i)] = model.log_likelihood(x, y) - corr;
  });
  bool second_degenerate = false;
  const auto second = WeightedParticles::from_log_weights(propagated, second_log_w, &second_degenerate);
  Stream final_rng = Stream::derive(seed, StreamTag::kResample, time_step, 1);
  const auto idx = systematic_resample(second.weights, n, final_rng);
  result.particles = resample_rows(propagated, idx);
  result.degenerate = first_degenerate || second_degenerate;
  if (!result.particles.allFinite()) {
    throw NonFiniteEnsemble("apf_step: non-finite particle at time step " + std::to_string(time_step));
  }
  return result;
}

std::vector<AssimilationRecord> run_enkf(const ModelSpec& model, const ReferenceRun& run, const BaselineConfig& config) {
  require(config.ensemble_size >= 2, "run_enkf: ensemble size must be >= 2");
  require(run.steps() >= 1, "run_enkf: empty reference run");
  std::vector<AssimilationRecord> records;
  Ensemble ens = sample_initial_prior(model, config.ensemble_size, config.seed);
  for (int k = 1; k <= run.steps(); ++k) {
    const auto idx = static_cast<std::size_t>(k - 1);
    const Vector& y = run.observations[idx];
    ens = (k == 1) ? enkf_analysis(ens, model, y, config.seed, 1)
                   : enkf_step(ens, model, y, config.seed, static_cast<std::uint64_t>(k - 1), config.threads);
    records.push_back(make_record(k, ens, run.states[idx], y, config.keep_snapshots));
  }
  return records;
}

std::vector<AssimilationRecord> run_apf(const ModelSpec& model, const ReferenceRun& run, const BaselineConfig& config) {
  require(config.ensemble_size >= 1, "run_apf: ensemble size must be >= 1");
  require(run.steps() >= 1, "run_apf: empty reference run");
  std::vector<AssimilationRecord> records;
  Ensemble ens = sample_initial_prior(model, config.ensemble_size, config.seed);
  for (int k = 1; k <= run.steps(); ++k) {
    const auto idx = static_cast<std::size_t>(k - 1);
    const Vector& y = run.observations[idx];
    ens = (k == 1) ? apf_initial(ens, model, y, config.seed).particles
                   : apf_step(ens, model, y, config.seed, static_cast<std::uint64_t>(k), config.threads).particles;
    records.push_back(make_record(k, ens, run.states[idx], y, config.keep_snapshots));
  }
  return records;
}

std::vector<AssimilationRecord> run_kalman(const ModelSpec& model, const ReferenceRun& run, const Vector& initial_mean) {
  require(model.linear.has_value(), "run_kalman: model is not linear-Gaussian");
  require(run.steps() >= 1, "run_kalman: empty reference run");
  LinearGaussianSpec spec = *model.linear;
  spec.initial_mean = initial_mean;
  const auto states = kalman_filter(spec, run.observations);
  std::vector<AssimilationRecord> records;
  for (int k = 1; k <= run.steps(); ++k) {
    const auto idx = static_cast<std::size_t>(k - 1);
    AssimilationRecord rec;
    rec.k = k;
    rec.mean = states[idx].mean;
    rec.std = states[idx].cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    rec.reference = run.states[idx];
    rec.observation = run.observations[idx];
    rec.metrics = evaluate_gaussian(k, states[idx].mean, states[idx].cov, rec.reference);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace ssls
