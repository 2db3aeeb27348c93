#include "ssls/metrics.hpp"
#include "ssls/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssls {
namespace {

Ensemble column(std::initializer_list<double> values) {
  Ensemble e(static_cast<Index>(values.size()), 1);
  Index i = 0;
  for (double v : values) e(i++, 0) = v;
  return e;
}

// Integral of (F_n(z) - 1{z >= y})^2 over the real line. The integrand is
// constant between consecutive breakpoints, so the quadrature is exact.
double crps_integral(std::vector<double> xs, double y) {
  std::vector<double> points = xs;
  points.push_back(y);
  std::sort(points.begin(), points.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double mid = 0.5 * (points[i] + points[i + 1]);
    const double f = static_cast<double>(std::upper_bound(xs.begin(), xs.end(), mid) - xs.begin()) / n;
    const double step = mid >= y ? 1.0 : 0.0;
    total += (f - step) * (f - step) * (points[i + 1] - points[i]);
  }
  return total;
}

TEST(Rmse, Examples) {
  Vector a(2), b(2);
  a << 1, 1;
  b << 0, 0;
  EXPECT_DOUBLE_EQ(rmse(a, b), 1.0);
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  EXPECT_THROW(rmse(a, Vector::Zero(3)), DimensionMismatch);
}

TEST(Spread, Examples) {
  EXPECT_DOUBLE_EQ(spread(column({1, 1, 1})), 0.0);
  // Unbiased variance of {0, 2} is 2.
  EXPECT_DOUBLE_EQ(spread(column({0, 2})), std::sqrt(2.0));
}

TEST(Spread, MatchesSampleStdTimesFiniteSampleFactor) {
  Stream rng(2);
  const Index n = 37;
  Ensemble e(n, 1);
  for (Index i = 0; i < n; ++i) e(i, 0) = rng.normal();
  const double mean = e.mean();
  const double population = std::sqrt((e.array() - mean).square().sum() / n);
  EXPECT_NEAR(spread(e), population * std::sqrt(static_cast<double>(n) / (n - 1)), 1e-14);
}

TEST(Coverage, Examples) {
  Ensemble e(101, 1);
  for (Index i = 0; i <= 100; ++i) e(i, 0) = static_cast<double>(i);
  EXPECT_DOUBLE_EQ(coverage(e, Vector::Constant(1, 50.0)), 1.0);
  EXPECT_DOUBLE_EQ(coverage(e, Vector::Constant(1, 200.0)), 0.0);
  EXPECT_DOUBLE_EQ(coverage(e, Vector::Constant(1, 2.0)), 0.0);
  EXPECT_DOUBLE_EQ(coverage(e, Vector::Constant(1, 3.0)), 1.0);
}

TEST(SortedQuantile, Type7) {
  const std::vector<double> xs{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.25), 1.75);
}

TEST(Crps, Examples) {
  EXPECT_DOUBLE_EQ(crps(column({0}), Vector::Constant(1, 1.0)), 1.0);
  EXPECT_DOUBLE_EQ(crps(column({0, 0, 0}), Vector::Constant(1, 0.0)), 0.0);
  // |1| + |1| / 2 - 4 / 8 = 0.5
  EXPECT_DOUBLE_EQ(crps(column({-1, 1}), Vector::Constant(1, 0.0)), 0.5);
}

TEST(Crps, MatchesIntegralForm) {
  Stream rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 60);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (auto& x : xs) x = 2.0 * rng.normal() + 0.5;
    const double y = 3.0 * rng.normal();
    EXPECT_NEAR(crps(xs, y), crps_integral(xs, y), 1e-6) << "trial " << trial;
  }
}

TEST(Crps, BoundedByMeanAbsoluteError) {
  Stream rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(25);
    for (auto& x : xs) x = rng.normal();
    const double y = rng.normal();
    double mae = 0.0;
    for (double x : xs) mae += std::abs(x - y);
    mae /= static_cast<double>(xs.size());
    const double value = crps(xs, y);
    EXPECT_GE(value, 0.0);
    EXPECT_LE(value, mae + 1e-15);
  }
}

TEST(Crps, PermutationInvariant) {
  Stream rng(10);
  std::vector<double> xs(40);
  for (auto& x : xs) x = rng.normal();
  const double base = crps(xs, 0.3);
  std::shuffle(xs.begin(), xs.end(), rng);
  EXPECT_NEAR(crps(xs, 0.3), base, 1e-14);
}

TEST(Crps, UnbiasedVariantUsesPairDivisor) {
  const std::vector<double> xs{-1, 1};
  // 1 - 4 / (2 * 2 * 1) = 0
  EXPECT_DOUBLE_EQ(crps(xs, 0.0, CrpsEstimator::kUnbiased), 0.0);
}

TEST(Crps, GaussianClosedFormAgreesWithLargeEnsemble) {
  Stream rng(12);
  std::vector<double> xs(200000);
  for (auto& x : xs) x = 1.0 + 2.0 * rng.normal();
  EXPECT_NEAR(crps(xs, 0.2), crps_gaussian(1.0, 2.0, 0.2), 0.01);
  // N(0,1) at 0: 2 phi(0) - 1/sqrt(pi)
  EXPECT_NEAR(crps_gaussian(0.0, 1.0, 0.0), 2.0 / std::sqrt(2.0 * M_PI) - 1.0 / std::sqrt(M_PI), 1e-15);
}

TEST(EvaluateGaussian, CoverageUsesExactQuantiles) {
  const Vector mean = Vector::Zero(2);
  const Matrix cov = Matrix::Identity(2, 2);
  Vector truth(2);
  truth << 1.9, 2.0;
  const MetricRow row = evaluate_gaussian(3, mean, cov, truth);
  EXPECT_EQ(row.k, 3);
  EXPECT_DOUBLE_EQ(row.coverage, 0.5);
  EXPECT_DOUBLE_EQ(row.spread, 1.0);
}

TEST(TimeAverage, Averages) {
  const std::vector<MetricRow> rows{{1, 1.0, 2.0, 0.0, 4.0}, {2, 3.0, 4.0, 1.0, 0.0}};
  const MetricRow avg = time_average(rows);
  EXPECT_DOUBLE_EQ(avg.rmse, 2.0);
  EXPECT_DOUBLE_EQ(avg.spread, 3.0);
  EXPECT_DOUBLE_EQ(avg.coverage, 0.5);
  EXPECT_DOUBLE_EQ(avg.crps, 2.0);
}

}  // namespace
}  // namespace ssls
