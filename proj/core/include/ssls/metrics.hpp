#pragma once

#include "ssls/types.hpp"

#include <span>
#include <vector>

namespace ssls {

struct MetricRow {
  int k = 0;
  double rmse = 0.0;
  double spread = 0.0;
  double coverage = 0.0;
  double crps = 0.0;
};

/// sqrt(mean_i (mean_i - truth_i)^2)
double rmse(const Vector& ensemble_mean, const Vector& truth);

/// Root mean trace of the unbiased (n-1) sample covariance.
double spread(const Ensemble& ensemble);

/// Type-7 quantile (linear interpolation between order statistics) of
/// already sorted data.
double sorted_quantile(std::span<const double> sorted, double p);

/// Fraction of dimensions whose truth lies within the empirical
/// [lower, upper] quantile interval of that marginal.
double coverage(const Ensemble& ensemble, const Vector& truth, double lower = 0.025, double upper = 0.975);

enum class CrpsEstimator {
  /// (1/n) sum |x_i - y| - (1/2n^2) sum_ij |x_i - x_j|
  kEnergy,
  /// Same pairwise term with divisor 2n(n-1).
  kUnbiased,
};

double crps(std::span<const double> samples, double truth, CrpsEstimator estimator = CrpsEstimator::kEnergy);

/// Per-dimension CRPS averaged over dimensions.
double crps(const Ensemble& ensemble, const Vector& truth, CrpsEstimator estimator = CrpsEstimator::kEnergy);

/// Closed-form CRPS of N(mean, std^2) at y.
double crps_gaussian(double mean, double std, double truth);

Vector ensemble_mean(const Ensemble& ensemble);
/// Per-dimension unbiased standard deviation; zeros when n < 2.
Vector ensemble_std(const Ensemble& ensemble);

MetricRow evaluate_ensemble(int k, const Ensemble& ensemble, const Vector& truth);

/// Metrics for a Gaussian forecast N(mean, cov): coverage uses the exact
/// 2.5%/97.5% marginal quantiles and CRPS the closed form.
MetricRow evaluate_gaussian(int k, const Vector& mean, const Matrix& cov, const Vector& truth);

/// Averages rows over time (k of the result is 0).
MetricRow time_average(std::span<const MetricRow> rows);

}  // namespace ssls
