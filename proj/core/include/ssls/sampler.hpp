#pragma once

#include "ssls/rng.hpp"
#include "ssls/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ssls {

enum class ScheduleKind { kLinear };

/// Inverse temperatures beta_1 < ... < beta_M = 1 (beta_0 = 0 is implicit).
std::vector<double> make_schedule(int temperatures, ScheduleKind kind = ScheduleKind::kLinear);

/// Settings for one annealed Langevin update.
struct AnnealPlan {
  std::vector<double> inverse_temperatures = make_schedule(10);
  int inner_steps = 20;
  double step_size = 0.01;
  /// Maximum L2 norm of the combined drift. Unset disables clipping.
  std::optional<double> clip_norm = 100.0;

  static AnnealPlan linear(int temperatures, int inner_steps, double step_size,
                           std::optional<double> clip_norm = 100.0);
  void validate() const;
};

/// Rescales v onto the ball of radius c when it lies outside.
Vector clip_score(const Vector& v, double c);

/// beta * grad_loglik + score, clipped to `clip_norm` when set.
Vector annealed_drift(double beta, const Vector& grad_loglik, const Vector& score,
                      std::optional<double> clip_norm = std::nullopt);

/// Evaluates a vector field on every particle (row) at once.
using BatchField = std::function<Ensemble(const Ensemble&)>;
/// Evaluates a vector field at a single state.
using PointField = std::function<Vector(const Vector&)>;

/// Identifies the noise substream for a Langevin step. Particle i at
/// (time step, temperature, iteration) draws from
/// Stream::derive(seed, kLangevin, time_step, temperature, iteration, i).
struct LangevinKey {
  std::uint64_t seed = 0;
  std::uint64_t time_step = 0;
  std::uint64_t temperature = 0;
  std::uint64_t iteration = 0;
};

/// One Euler-Maruyama step z <- z + h * drift(z) + sqrt(2h) * xi per particle.
Ensemble lmc_step(const Ensemble& particles, const BatchField& drift, double step_size, const LangevinKey& key,
                  int threads = 1);

/// Annealed Langevin Monte Carlo: starting from the predicted particles,
/// runs `inner_steps` LMC steps at each inverse temperature with drift
/// beta_m * grad log g + score, chaining the end of one temperature into
/// the start of the next. Throws NonFiniteEnsemble naming the temperature
/// and iteration when a particle blows up.
Ensemble almc_update(const Ensemble& predicted, const BatchField& score, const PointField& grad_loglik,
                     const AnnealPlan& plan, std::uint64_t seed, std::uint64_t time_step, int threads = 1);

}  // namespace ssls
