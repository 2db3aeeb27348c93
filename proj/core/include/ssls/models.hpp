#pragma once

#include "ssls/rng.hpp"
#include "ssls/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ssls {

/// Matrix-form linear-Gaussian state-space model:
///   x_{k+1} = A x_k + v_k,  v_k ~ N(0, Q)
///   y_k     = H x_k + w_k,  w_k ~ N(0, R)
///   x_1     ~ N(m0, P0)
struct LinearGaussianSpec {
  Matrix transition;
  Matrix process_cov;
  Matrix observation;
  Matrix observation_cov;
  Vector initial_mean;
  Matrix initial_cov;

  Index state_dim() const { return transition.rows(); }
  Index obs_dim() const { return observation.rows(); }
  void validate() const;
};

/// A discrete-time state-space model. Observations are h(x) plus additive
/// Gaussian noise with per-component standard deviation `obs_noise_std`;
/// the log-likelihood and its gradient are stored explicitly so samplers
/// never differentiate numerically.
struct ModelSpec {
  std::string name;
  Index state_dim = 0;
  Index noise_dim = 0;
  Index obs_dim = 0;

  /// One step x_{k+1} = F(x_k, v_k). A zero noise draw gives the deterministic map.
  std::function<Vector(const Vector& state, const Vector& noise)> dynamics;
  std::function<Vector(Stream&)> dynamics_noise_sampler;

  /// Noiseless measurement h(x).
  std::function<Vector(const Vector& state)> measurement;
  Vector obs_noise_std;

  /// log g(y|x) up to an additive constant.
  std::function<double(const Vector& state, const Vector& observation)> log_likelihood;
  std::function<Vector(const Vector& state, const Vector& observation)> log_likelihood_grad;

  /// The assimilator's guess of the initial prior.
  std::function<Vector(Stream&)> initial_prior_sampler;
  /// The law the reference trajectory actually starts from.
  std::function<Vector(Stream&)> reference_initial_sampler;

  /// Present only for linear-Gaussian models; enables the exact Kalman filter.
  std::optional<LinearGaussianSpec> linear;

  Vector zero_noise() const { return Vector::Zero(noise_dim); }
  Vector sample_observation(const Vector& state, Stream& rng) const;
};

struct LinearGaussianParams {
  double process_var = 5.0;
  double obs_var = 0.2;
  double prior_mean = 0.0;
  double prior_var = 1.0;
  /// Mean offset of the guess prior relative to the true initial prior.
  double guess_shift = 0.0;
};

/// 1-D random walk observed in Gaussian noise.
ModelSpec make_linear_gaussian(const LinearGaussianParams& params = {});

enum class MeasurementKind { kLinear, kExponential };

struct DoubleWellParams {
  double beta = 0.3;
  double dt = 0.1;
  MeasurementKind measurement = MeasurementKind::kLinear;
  double sigma_obs = 0.1;
  /// Offset in y = exp(x - gamma) + noise. Held constant over time.
  double gamma = 0.6;
  /// Both the reference and the filters start from N(-1, 0.15^2).
  double reference_initial_mean = -1.0;
  double reference_initial_std = 0.15;
  double guess_mean = -1.0;
  double guess_std = 0.15;
};

/// Gradient of the potential U(x) = x^4 - 2x^2.
double double_well_grad_potential(double x);

ModelSpec make_double_well(const DoubleWellParams& params = {});

struct Lorenz96Params {
  Index dim = 20;
  double forcing = 8.0;
  double dt = 0.05;
  /// Standard deviation of the Gaussian jitter added once per RK4 step.
  double process_noise_std = 0.31622776601683794;
  double sigma_obs = 0.5;
  /// Reference initial states are spun up from F + N(0,1) for this many
  /// noiseless steps so they start on the attractor.
  int spinup_steps = 200;
  double guess_mean = 0.0;
  double guess_std = 1.0;
};

/// dZ_i/dt = (Z_{i+1} - Z_{i-2}) Z_{i-1} - Z_i + F with cyclic indices.
Vector lorenz96_rhs(const Vector& z, double forcing);

/// One classical fourth-order Runge-Kutta step of dz/dt = rhs(z).
template <typename Rhs>
Vector rk4_step(Rhs&& rhs, const Vector& z, double dt) {
  const Vector k1 = rhs(z);
  const Vector k2 = rhs(Vector(z + 0.5 * dt * k1));
  const Vector k3 = rhs(Vector(z + 0.5 * dt * k2));
  const Vector k4 = rhs(Vector(z + dt * k3));
  return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

ModelSpec make_lorenz96(const Lorenz96Params& params = {});

struct ReferenceRun {
  std::vector<Vector> states;
  std::vector<Vector> observations;
  /// 1-based time indices k at which X_k was negated before propagation.
  std::vector<int> mutation_times;

  int steps() const { return static_cast<int>(states.size()); }
};

/// Simulates X_1..X_K and Y_1..Y_K. When `mutation_period` is set, X_k is
/// replaced by -X_k before the dynamics step whenever k is a multiple of it.
ReferenceRun simulate_reference(const ModelSpec& model, int steps, std::optional<int> mutation_period,
                                Stream& rng);

}  // namespace ssls
