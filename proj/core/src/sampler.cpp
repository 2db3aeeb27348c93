#include "ssls/sampler.hpp"

#include "ssls/parallel.hpp"

#include <cmath>
#include <string>

namespace ssls {

std::vector<double> make_schedule(int temperatures, ScheduleKind kind) {
  require(temperatures >= 1, "make_schedule: need at least one temperature");
  std::vector<double> betas(static_cast<std::size_t>(temperatures));
  switch (kind) {
    case ScheduleKind::kLinear:
      for (int m = 1; m <= temperatures; ++m) betas[m - 1] = static_cast<double>(m) / temperatures;
      break;
  }
  betas.back() = 1.0;
  return betas;
}

AnnealPlan AnnealPlan::linear(int temperatures, int inner_steps, double step_size, std::optional<double> clip_norm) {
  AnnealPlan plan;
  plan.inverse_temperatures = make_schedule(temperatures, ScheduleKind::kLinear);
  plan.inner_steps = inner_steps;
  plan.step_size = step_size;
  plan.clip_norm = clip_norm;
  plan.validate();
  return plan;
}

void AnnealPlan::validate() const {
  require(!inverse_temperatures.empty(), "AnnealPlan: at least one temperature required");
  double prev = 0.0;
  for (double b : inverse_temperatures) {
    require(b > prev && b <= 1.0, "AnnealPlan: inverse temperatures must increase strictly within (0, 1]");
    prev = b;
  }
  require(inverse_temperatures.back() == 1.0, "AnnealPlan: final inverse temperature must be exactly 1");
  require(inner_steps >= 1, "AnnealPlan: inner_steps must be >= 1");
  require(step_size > 0.0, "AnnealPlan: step_size must be positive");
  require(!clip_norm || *clip_norm > 0.0, "AnnealPlan: clip_norm must be positive");
}

Vector clip_score(const Vector& v, double c) {
  require(c > 0.0, "clip_score: threshold must be positive");
  const double norm = v.norm();
  if (norm <= c) return v;
  return v * (c / norm);
}

Vector annealed_drift(double beta, const Vector& grad_loglik, const Vector& score, std::optional<double> clip_norm) {
  require(beta >= 0.0 && beta <= 1.0, "annealed_drift: beta must lie in [0, 1]");
  require_dim(score.size(), grad_loglik.size(), "annealed_drift: score");
  Vector drift = beta * grad_loglik + score;
  if (clip_norm) drift = clip_score(drift, *clip_norm);
  return drift;
}

Ensemble lmc_step(const Ensemble& particles, const BatchField& drift, double step_size, const LangevinKey& key,
                  int threads) {
  require(step_size >= 0.0, "lmc_step: step size must be non-negative");
  if (step_size == 0.0) return particles;
  const Ensemble b = drift(particles);
  require(b.rows() == particles.rows() && b.cols() == particles.cols(), "lmc_step: drift has wrong shape");
  const double diffusion = std::sqrt(2.0 * step_size);
  Ensemble next(particles.rows(), particles.cols());
  parallel_for(particles.rows(), threads, [&](Index i) {
    Stream rng = Stream::derive(key.seed, StreamTag::kLangevin, key.time_step, key.temperature, key.iteration,
                                static_cast<std::uint64_t>(i));
    for (Index j = 0; j < particles.cols(); ++j) {
      next(i, j) = particles(i, j) + step_size * b(i, j) + diffusion * rng.normal();
    }
  });
  return next;
}

Ensemble almc_update(const Ensemble& predicted, const BatchField& score, const PointField& grad_loglik,
                     const AnnealPlan& plan, std::uint64_t seed, std::uint64_t time_step, int threads) {
  plan.validate();
  require(predicted.rows() > 0, "almc_update: empty ensemble");

  Ensemble z = predicted;
  const auto& betas = plan.inverse_temperatures;
  for (std::size_t m = 0; m < betas.size(); ++m) {
    const double beta = betas[m];
    const BatchField drift = [&](const Ensemble& x) {
      Ensemble s = score(x);
      parallel_for(x.rows(), threads, [&](Index i) {
        const Vector g = grad_loglik(x.row(i).transpose());
        s.row(i) = annealed_drift(beta, g, s.row(i).transpose(), plan.clip_norm).transpose();
      });
      return s;
    };
    for (int l = 0; l < plan.inner_steps; ++l) {
      const LangevinKey key{seed, time_step, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(l)};
      z = lmc_step(z, drift, plan.step_size, key, threads);
      if (!z.allFinite()) {
        throw NonFiniteEnsemble("almc_update: non-finite particle at temperature index " + std::to_string(m + 1) +
                                " (beta=" + std::to_string(beta) + "), iteration " + std::to_string(l) +
                                ", time step " + std::to_string(time_step));
      }
    }
  }
  return z;
}

}  // namespace ssls
