#include "ssls/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace ssls {
namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Ensemble gaussian_ensemble(Index n, double mean, double sd, std::uint64_t seed) {
  Stream rng(seed);
  Ensemble e(n, 1);
  for (Index i = 0; i < n; ++i) e(i, 0) = mean + sd * rng.normal();
  return e;
}

const BatchField standard_normal_score = [](const Ensemble& x) -> Ensemble { return -x; };

TEST(Schedule, Linear) {
  EXPECT_EQ(make_schedule(1), (std::vector<double>{1.0}));
  EXPECT_EQ(make_schedule(4), (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
  for (int m = 1; m <= 37; ++m) {
    const auto s = make_schedule(m);
    EXPECT_EQ(s.back(), 1.0);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1], s[i]);
  }
  EXPECT_THROW(make_schedule(0), InvalidArgument);
}

TEST(AnnealPlan, Validation) {
  EXPECT_NO_THROW(AnnealPlan::linear(10, 20, 0.01));
  AnnealPlan plan;
  plan.inverse_temperatures = {0.5, 0.9};
  EXPECT_THROW(plan.validate(), InvalidArgument);
  plan.inverse_temperatures = {0.5, 0.5, 1.0};
  EXPECT_THROW(plan.validate(), InvalidArgument);
  plan.inverse_temperatures = {0.0, 1.0};
  EXPECT_THROW(plan.validate(), InvalidArgument);
  plan.inverse_temperatures = {1.0};
  plan.inner_steps = 0;
  EXPECT_THROW(plan.validate(), InvalidArgument);
  plan.inner_steps = 1;
  plan.step_size = 0.0;
  EXPECT_THROW(plan.validate(), InvalidArgument);
}

TEST(ClipScore, Examples) {
  const Vector v = vec2(3.0, 0.0);
  EXPECT_EQ(clip_score(v, 5.0), v);
  EXPECT_EQ(clip_score(vec2(10.0, 0.0), 5.0), vec2(5.0, 0.0));
  EXPECT_EQ(clip_score(Vector::Zero(2), 5.0), Vector::Zero(2));
  EXPECT_THROW(clip_score(v, 0.0), InvalidArgument);
}

TEST(ClipScore, NormBoundAndIdempotence) {
  Stream rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector v = 10.0 * rng.normal_vector(3);
    const double c = 0.1 + 10.0 * rng.uniform();
    const Vector once = clip_score(v, c);
    EXPECT_LE(once.norm(), c * (1.0 + 1e-15));
    EXPECT_LE((clip_score(once, c) - once).cwiseAbs().maxCoeff(), 1e-14 * c);
    if (v.norm() > 0.0) EXPECT_NEAR(once.normalized().dot(v.normalized()), 1.0, 1e-12);
  }
}

TEST(AnnealedDrift, Examples) {
  const Vector g = vec2(2.0, 0.0);
  const Vector s = vec2(0.0, 1.0);
  EXPECT_EQ(annealed_drift(0.0, g, s), s);
  EXPECT_EQ(annealed_drift(1.0, g, s), g + s);
  EXPECT_EQ(annealed_drift(0.5, g, s), vec2(1.0, 1.0));
  // Clipping applies to the combined drift.
  EXPECT_NEAR(annealed_drift(1.0, vec2(30.0, 0.0), vec2(0.0, 40.0), 5.0).norm(), 5.0, 1e-12);
  EXPECT_THROW(annealed_drift(1.5, g, s), InvalidArgument);
}

TEST(LmcStep, ZeroStepLeavesParticlesUnchanged) {
  const Ensemble x = gaussian_ensemble(10, 0.0, 1.0, 3);
  EXPECT_EQ(lmc_step(x, standard_normal_score, 0.0, {}), x);
}

TEST(LmcStep, PureDiffusionFromOrigin) {
  const Ensemble origin = Ensemble::Zero(1, 2);
  const BatchField zero = [](const Ensemble& x) -> Ensemble { return Ensemble::Zero(x.rows(), x.cols()); };
  const double h = 0.04;
  const LangevinKey key{5, 1, 2, 3};
  const Ensemble out = lmc_step(origin, zero, h, key);
  Stream rng = Stream::derive(5, StreamTag::kLangevin, 1, 2, 3, 0);
  const double xi0 = rng.normal();
  const double xi1 = rng.normal();
  EXPECT_DOUBLE_EQ(out(0, 0), std::sqrt(2 * h) * xi0);
  EXPECT_DOUBLE_EQ(out(0, 1), std::sqrt(2 * h) * xi1);
}

TEST(LmcStep, StationaryLawOfGaussianScore) {
  Ensemble x = gaussian_ensemble(4000, 3.0, 0.1, 4);
  const double h = 0.01;
  for (int l = 0; l < 1000; ++l) x = lmc_step(x, standard_normal_score, h, {9, 0, 0, static_cast<std::uint64_t>(l)});
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / (x.rows() - 1);
  // Euler-Maruyama on the OU process has stationary variance 1 / (1 - h/2).
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(4000.0));
  EXPECT_NEAR(var, 1.0 / (1.0 - h / 2.0), 0.08);
}

TEST(LmcStep, SizePreserved) {
  const Ensemble x = gaussian_ensemble(17, 0.0, 1.0, 5);
  EXPECT_EQ(lmc_step(x, standard_normal_score, 0.1, {}).rows(), 17);
}

TEST(AlmcUpdate, SingleTemperatureIsVanillaLmc) {
  const Ensemble x = gaussian_ensemble(50, 0.5, 1.0, 6);
  const PointField grad = [](const Vector& z) -> Vector { return (0.5 - z.array()).matrix() / 0.2; };
  const AnnealPlan plan = AnnealPlan::linear(1, 7, 0.01, std::nullopt);
  const Ensemble almc = almc_update(x, standard_normal_score, grad, plan, 3, 4);

  Ensemble manual = x;
  const BatchField posterior_drift = [&](const Ensemble& z) -> Ensemble {
    Ensemble out = -z;
    for (Index i = 0; i < z.rows(); ++i) out.row(i) += grad(z.row(i).transpose()).transpose();
    return out;
  };
  for (int l = 0; l < 7; ++l) manual = lmc_step(manual, posterior_drift, 0.01, {3, 4, 0, static_cast<std::uint64_t>(l)});
  EXPECT_LE((almc - manual).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AlmcUpdate, FlatLikelihoodKeepsPrior) {
  const Ensemble x = gaussian_ensemble(3000, 0.0, 1.0, 7);
  const PointField flat = [](const Vector& z) -> Vector { return Vector::Zero(z.size()); };
  const Ensemble out = almc_update(x, standard_normal_score, flat, AnnealPlan::linear(10, 50, 0.01), 1, 1);
  const double mean = out.mean();
  const double var = (out.array() - mean).square().sum() / (out.rows() - 1);
  EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(3000.0));
  EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(AlmcUpdate, ConjugateGaussianPosterior) {
  // Prior N(0,1), y = 0.5, noise variance 0.2: posterior precision 1 + 5 = 6,
  // mean (0.5 / 0.2) / 6 = 0.416667, variance 1/6.
  const Index n = 2000;
  const Ensemble prior = gaussian_ensemble(n, 0.0, 1.0, 8);
  const PointField grad = [](const Vector& z) -> Vector { return (0.5 - z.array()).matrix() / 0.2; };
  const Ensemble out = almc_update(prior, standard_normal_score, grad, AnnealPlan::linear(10, 50, 0.01), 11, 1);
  const double mean = out.mean();
  const double var = (out.array() - mean).square().sum() / (n - 1);
  const double post_mean = 2.5 / 6.0;
  const double post_var = 1.0 / 6.0;
  EXPECT_LE(std::abs(mean - post_mean), 3.0 * std::sqrt(post_var / n));
  EXPECT_LE(std::abs(var / post_var - 1.0), 0.15);
}

TEST(AlmcUpdate, ParallelExecutionIsBitIdentical) {
  const Ensemble x = gaussian_ensemble(257, 0.0, 2.0, 9);
  const PointField grad = [](const Vector& z) -> Vector { return (1.0 - z.array()).matrix(); };
  const AnnealPlan plan = AnnealPlan::linear(3, 5, 0.02);
  const Ensemble serial = almc_update(x, standard_normal_score, grad, plan, 42, 3, 1);
  const Ensemble parallel = almc_update(x, standard_normal_score, grad, plan, 42, 3, 4);
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial, almc_update(x, standard_normal_score, grad, plan, 42, 3, 1));
  EXPECT_EQ(serial.rows(), x.rows());
}

TEST(AlmcUpdate, NonFiniteParticleIsReported) {
  const Ensemble x = gaussian_ensemble(4, 0.0, 1.0, 10);
  const BatchField exploding = [](const Ensemble& z) -> Ensemble {
    return Ensemble::Constant(z.rows(), z.cols(), std::numeric_limits<double>::infinity());
  };
  const PointField flat = [](const Vector& z) -> Vector { return Vector::Zero(z.size()); };
  try {
    almc_update(x, exploding, flat, AnnealPlan::linear(2, 3, 0.1, std::nullopt), 1, 6);
    FAIL() << "expected NonFiniteEnsemble";
  } catch (const NonFiniteEnsemble& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("temperature index 1"), std::string::npos) << what;
    EXPECT_NE(what.find("iteration 0"), std::string::npos) << what;
  }
}

TEST(AlmcUpdate, RejectsEmptyEnsemble) {
  const PointField flat = [](const Vector& z) -> Vector { return Vector::Zero(z.size()); };
  EXPECT_THROW(almc_update(Ensemble(0, 1), standard_normal_score, flat, AnnealPlan{}, 1, 1), InvalidArgument);
}

}  // namespace
}  // namespace ssls
