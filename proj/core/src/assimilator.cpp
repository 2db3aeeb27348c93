#include "ssls/assimilator.hpp"

#include "ssls/parallel.hpp"

#include <string>

namespace ssls {

void SslsConfig::validate() const {
  require(ensemble_size >= 2, "SslsConfig: ensemble size must be >= 2");
  require(initial_epochs >= 0, "SslsConfig: initial_epochs must be non-negative");
  require(threads >= 1, "SslsConfig: threads must be >= 1");
  train.validate();
  plan.validate();
}

Ensemble sample_initial_prior(const ModelSpec& model, Index n, std::uint64_t seed) {
  require(n >= 1, "sample_initial_prior: n must be positive");
  Ensemble out(n, model.state_dim);
  for (Index i = 0; i < n; ++i) {
    Stream rng = Stream::derive(seed, StreamTag::kInitialPrior, static_cast<std::uint64_t>(i));
    const Vector x = model.initial_prior_sampler(rng);
    require_dim(x.size(), model.state_dim, "sample_initial_prior");
    out.row(i) = x.transpose();
  }
  return out;
}

Ensemble predict(const Ensemble& posterior, const ModelSpec& model, std::uint64_t seed, std::uint64_t time_step,
                 int threads) {
  require_dim(posterior.cols(), model.state_dim, "predict: ensemble");
  Ensemble out(posterior.rows(), posterior.cols());
  parallel_for(posterior.rows(), threads, [&](Index i) {
    Stream rng = Stream::derive(seed, StreamTag::kPrediction, time_step, static_cast<std::uint64_t>(i));
    out.row(i) = model.dynamics(posterior.row(i).transpose(), model.dynamics_noise_sampler(rng)).transpose();
  });
  if (!out.allFinite()) {
    throw NonFiniteEnsemble("predict: non-finite particle at time step " + std::to_string(time_step));
  }
  return out;
}

Ensemble langevin_update(const Ensemble& predicted, const ScoreNetwork& score, const ModelSpec& model,
                         const Vector& observation, const AnnealPlan& plan, std::uint64_t seed,
                         std::uint64_t time_step, int threads) {
  require_dim(observation.size(), model.obs_dim, "langevin_update: observation");
  const BatchField score_field = [&score](const Ensemble& x) { return score.forward_batch(x); };
  const PointField grad_field = [&model, &observation](const Vector& x) {
    return model.log_likelihood_grad(x, observation);
  };
  return almc_update(predicted, score_field, grad_field, plan, seed, time_step, threads);
}

SslsFilter::SslsFilter(const ModelSpec& model, SslsConfig config) : model_(model), config_(std::move(config)) {
  config_.validate();
}

const Ensemble& SslsFilter::update(const Ensemble& predicted, const Vector& observation, int epochs) {
  try {
    TrainConfig train = config_.train;
    train.epochs = epochs;
    const std::uint64_t train_seed =
        derive_key(config_.seed, {static_cast<std::uint64_t>(StreamTag::kTraining), static_cast<std::uint64_t>(time_step_)});
    const ScoreNetwork* init = network_ ? &*network_ : nullptr;
    network_ = train_score(predicted, train, init, train_seed);
    posterior_ = langevin_update(predicted, *network_, model_, observation, config_.plan, config_.seed,
                                 static_cast<std::uint64_t>(time_step_), config_.threads);
  } catch (const TrainingDivergence& e) {
    throw TrainingDivergence("step " + std::to_string(time_step_) + ": " + e.what());
  } catch (const NonFiniteEnsemble& e) {
    throw NonFiniteEnsemble("step " + std::to_string(time_step_) + ": " + e.what());
  }
  return posterior_;
}

const Ensemble& SslsFilter::initialize(const Ensemble& prior_samples, const Vector& observation) {
  require(prior_samples.rows() >= 2, "SslsFilter::initialize: need at least 2 prior samples");
  require_dim(prior_samples.cols(), model_.state_dim, "SslsFilter::initialize: prior samples");
  time_step_ = 1;
  network_.reset();
  const int epochs = config_.initial_epochs > 0 ? config_.initial_epochs : config_.train.epochs;
  return update(prior_samples, observation, epochs);
}

const Ensemble& SslsFilter::advance(const Vector& observation) {
  require(time_step_ >= 1, "SslsFilter::advance: call initialize first");
  const Ensemble predicted = predict(posterior_, model_, config_.seed, static_cast<std::uint64_t>(time_step_),
                                     config_.threads);
  ++time_step_;
  if (!config_.train.warm_start) network_.reset();
  return update(predicted, observation, config_.train.epochs);
}

Ensemble initial_update(const Ensemble& prior_samples, const ModelSpec& model, const Vector& observation,
                        const SslsConfig& config) {
  SslsFilter filter(model, config);
  return filter.initialize(prior_samples, observation);
}

std::vector<AssimilationRecord> assimilate(const ModelSpec& model, const ReferenceRun& run, const SslsConfig& config) {
  require(run.steps() >= 1, "assimilate: empty reference run");
  config.validate();
  SslsFilter filter(model, config);
  std::vector<AssimilationRecord> records;
  records.reserve(static_cast<std::size_t>(run.steps()));
  const Ensemble prior = sample_initial_prior(model, config.ensemble_size, config.seed);
  for (int k = 1; k <= run.steps(); ++k) {
    const Vector& y = run.observations[static_cast<std::size_t>(k - 1)];
    const Ensemble& post = (k == 1) ? filter.initialize(prior, y) : filter.advance(y);
    records.push_back(make_record(k, post, run.states[static_cast<std::size_t>(k - 1)], y, config.keep_snapshots));
  }
  return records;
}

}  // namespace ssls
