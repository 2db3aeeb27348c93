#include "ssls/models.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace ssls {

namespace {

bool is_symmetric_psd(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-10;
}

// Fills in measurement/likelihood fields for y = h(x) + diag(obs_std) w.
// `jacobian_t_times` computes J_h(x)^T r.
template <typename H, typename JtR>
void attach_gaussian_measurement(ModelSpec& model, Vector obs_std, H h, JtR jacobian_t_times) {
  model.obs_dim = obs_std.size();
  model.obs_noise_std = obs_std;
  const Vector inv_var = obs_std.array().square().inverse().matrix();
  model.measurement = h;
  model.log_likelihood = [h, inv_var](const Vector& x, const Vector& y) {
    const Vector r = y - h(x);
    return -0.5 * r.cwiseProduct(r).dot(inv_var);
  };
  model.log_likelihood_grad = [h, jacobian_t_times, inv_var](const Vector& x, const Vector& y) {
    const Vector r = (y - h(x)).cwiseProduct(inv_var);
    return jacobian_t_times(x, r);
  };
}

std::function<Vector(Stream&)> gaussian_sampler(Vector mean, Vector std) {
  return [mean = std::move(mean), std = std::move(std)](Stream& rng) {
    Vector x(mean.size());
    for (Index i = 0; i < mean.size(); ++i) x[i] = mean[i] + std[i] * rng.normal();
    return x;
  };
}

}  // namespace

void LinearGaussianSpec::validate() const {
  const Index d = transition.rows();
  require(transition.cols() == d && d > 0, "LinearGaussianSpec: transition must be square");
  require(process_cov.rows() == d && process_cov.cols() == d, "LinearGaussianSpec: Q must be d x d");
  require(observation.cols() == d && observation.rows() > 0, "LinearGaussianSpec: H must have d columns");
  const Index p = observation.rows();
  require(observation_cov.rows() == p && observation_cov.cols() == p, "LinearGaussianSpec: R must be p x p");
  require(initial_mean.size() == d, "LinearGaussianSpec: m0 must have dimension d");
  require(initial_cov.rows() == d && initial_cov.cols() == d, "LinearGaussianSpec: P0 must be d x d");
  require(is_symmetric_psd(process_cov), "LinearGaussianSpec: Q must be symmetric PSD");
  require(is_symmetric_psd(observation_cov), "LinearGaussianSpec: R must be symmetric PSD");
  require(is_symmetric_psd(initial_cov), "LinearGaussianSpec: P0 must be symmetric PSD");
}

Vector ModelSpec::sample_observation(const Vector& state, Stream& rng) const {
  Vector y = measurement(state);
  for (Index i = 0; i < y.size(); ++i) y[i] += obs_noise_std[i] * rng.normal();
  return y;
}

ModelSpec make_linear_gaussian(const LinearGaussianParams& p) {
  require(p.process_var >= 0.0, "linear_gaussian: process variance must be non-negative");
  require(p.obs_var > 0.0, "linear_gaussian: observation variance must be positive");
  require(p.prior_var > 0.0, "linear_gaussian: prior variance must be positive");

  ModelSpec model;
  model.name = "linear_gaussian";
  model.state_dim = 1;
  model.noise_dim = 1;
  const double q_std = std::sqrt(p.process_var);
  model.dynamics = [](const Vector& x, const Vector& v) -> Vector { return x + v; };
  model.dynamics_noise_sampler = [q_std](Stream& rng) { return Vector::Constant(1, q_std * rng.normal()); };
  attach_gaussian_measurement(
      model, Vector::Constant(1, std::sqrt(p.obs_var)), [](const Vector& x) -> Vector { return x; },
      [](const Vector&, const Vector& r) -> Vector { return r; });

  const double prior_std = std::sqrt(p.prior_var);
  model.reference_initial_sampler = gaussian_sampler(Vector::Constant(1, p.prior_mean), Vector::Constant(1, prior_std));
  model.initial_prior_sampler =
      gaussian_sampler(Vector::Constant(1, p.prior_mean + p.guess_shift), Vector::Constant(1, prior_std));

  LinearGaussianSpec lin;
  lin.transition = Matrix::Identity(1, 1);
  lin.process_cov = Matrix::Constant(1, 1, p.process_var);
  lin.observation = Matrix::Identity(1, 1);
  lin.observation_cov = Matrix::Constant(1, 1, p.obs_var);
  lin.initial_mean = Vector::Constant(1, p.prior_mean);
  lin.initial_cov = Matrix::Constant(1, 1, p.prior_var);
  model.linear = std::move(lin);
  return model;
}

double double_well_grad_potential(double x) { return 4.0 * x * x * x - 4.0 * x; }

ModelSpec make_double_well(const DoubleWellParams& p) {
  require(p.beta > 0.0, "double_well: beta must be positive");
  require(p.dt > 0.0, "double_well: dt must be positive");
  require(p.sigma_obs > 0.0, "double_well: sigma_obs must be positive");

  ModelSpec model;
  model.state_dim = 1;
  model.noise_dim = 1;
  const double dt = p.dt;
  const double diffusion = p.beta * std::sqrt(p.dt);
  model.dynamics = [dt, diffusion](const Vector& x, const Vector& v) -> Vector {
    return Vector::Constant(1, x[0] - dt * double_well_grad_potential(x[0]) + diffusion * v[0]);
  };
  model.dynamics_noise_sampler = [](Stream& rng) { return Vector::Constant(1, rng.normal()); };

  const Vector obs_std = Vector::Constant(1, p.sigma_obs);
  if (p.measurement == MeasurementKind::kLinear) {
    model.name = "double_well_linear";
    attach_gaussian_measurement(
        model, obs_std, [](const Vector& x) -> Vector { return x; },
        [](const Vector&, const Vector& r) -> Vector { return r; });
  } else {
    model.name = "double_well_nonlinear";
    const double gamma = p.gamma;
    attach_gaussian_measurement(
        model, obs_std, [gamma](const Vector& x) -> Vector { return Vector::Constant(1, std::exp(x[0] - gamma)); },
        [gamma](const Vector& x, const Vector& r) -> Vector { return Vector::Constant(1, std::exp(x[0] - gamma) * r[0]); });
  }

  model.reference_initial_sampler = gaussian_sampler(Vector::Constant(1, p.reference_initial_mean),
                                                     Vector::Constant(1, p.reference_initial_std));
  model.initial_prior_sampler = gaussian_sampler(Vector::Constant(1, p.guess_mean), Vector::Constant(1, p.guess_std));
  return model;
}

Vector lorenz96_rhs(const Vector& z, double forcing) {
  const Index d = z.size();
  Vector out(d);
  for (Index i = 0; i < d; ++i) {
    const double next = z[(i + 1) % d];
    const double prev = z[(i + d - 1) % d];
    const double prev2 = z[(i + d - 2) % d];
    out[i] = (next - prev2) * prev - z[i] + forcing;
  }
  return out;
}

ModelSpec make_lorenz96(const Lorenz96Params& p) {
  require(p.dim >= 4, "lorenz96: dim must be at least 4");
  require(p.dt > 0.0, "lorenz96: dt must be positive");
  require(p.process_noise_std >= 0.0, "lorenz96: process noise std must be non-negative");
  require(p.sigma_obs > 0.0, "lorenz96: sigma_obs must be positive");
  require(p.spinup_steps >= 0, "lorenz96: spinup_steps must be non-negative");

  ModelSpec model;
  model.name = "lorenz96";
  model.state_dim = p.dim;
  model.noise_dim = p.dim;
  const double forcing = p.forcing;
  const double dt = p.dt;
  const double noise_std = p.process_noise_std;
  const auto rhs = [forcing](const Vector& z) { return lorenz96_rhs(z, forcing); };
  model.dynamics = [rhs, dt, noise_std](const Vector& x, const Vector& v) -> Vector {
    return rk4_step(rhs, x, dt) + noise_std * v;
  };
  const Index dim = p.dim;
  model.dynamics_noise_sampler = [dim](Stream& rng) { return rng.normal_vector(dim); };
  attach_gaussian_measurement(
      model, Vector::Constant(dim, p.sigma_obs), [](const Vector& x) -> Vector { return x; },
      [](const Vector&, const Vector& r) -> Vector { return r; });

  const int spinup = p.spinup_steps;
  model.reference_initial_sampler = [rhs, dt, dim, forcing, spinup](Stream& rng) {
    Vector z = Vector::Constant(dim, forcing) + rng.normal_vector(dim);
    for (int s = 0; s < spinup; ++s) z = rk4_step(rhs, z, dt);
    return z;
  };
  model.initial_prior_sampler = gaussian_sampler(Vector::Constant(dim, p.guess_mean), Vector::Constant(dim, p.guess_std));
  return model;
}

ReferenceRun simulate_reference(const ModelSpec& model, int steps, std::optional<int> mutation_period, Stream& rng) {
  require(steps >= 1, "simulate_reference: steps must be >= 1");
  require(!mutation_period || *mutation_period >= 1, "simulate_reference: mutation_period must be >= 1");

  ReferenceRun run;
  run.states.reserve(static_cast<std::size_t>(steps));
  run.observations.reserve(static_cast<std::size_t>(steps));
  Vector x = model.reference_initial_sampler(rng);
  require_dim(x.size(), model.state_dim, "simulate_reference: initial state");
  for (int k = 1; k <= steps; ++k) {
    run.states.push_back(x);
    run.observations.push_back(model.sample_observation(x, rng));
    if (k == steps) break;
    Vector source = x;
    if (mutation_period && k % *mutation_period == 0) source = -x;
    x = model.dynamics(source, model.dynamics_noise_sampler(rng));
  }
  if (mutation_period) {
    for (int k = *mutation_period; k <= steps; k += *mutation_period) run.mutation_times.push_back(k);
  }
  return run;
}

}  // namespace ssls
