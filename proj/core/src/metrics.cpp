#include "ssls/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ssls {

namespace {

// Two-sided 95% standard-normal quantile.
constexpr double kZ975 = 1.959963984540054;

double sorted_pairwise_sum(std::span<const double> sorted) {
  // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - n + 1) x_(i) with 0-based i.
  const double n = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) acc += (2.0 * static_cast<double>(i) - n + 1.0) * sorted[i];
  return 2.0 * acc;
}

double crps_sorted(std::span<const double> sorted, double truth, CrpsEstimator estimator) {
  const double n = static_cast<double>(sorted.size());
  double abs_err = 0.0;
  for (double x : sorted) abs_err += std::abs(x - truth);
  abs_err /= n;
  if (sorted.size() == 1) return abs_err;
  const double pair = sorted_pairwise_sum(sorted);
  const double divisor = estimator == CrpsEstimator::kEnergy ? 2.0 * n * n : 2.0 * n * (n - 1.0);
  return abs_err - pair / divisor;
}

std::vector<double> sorted_column(const Ensemble& ensemble, Index j) {
  std::vector<double> col(static_cast<std::size_t>(ensemble.rows()));
  for (Index i = 0; i < ensemble.rows(); ++i) col[static_cast<std::size_t>(i)] = ensemble(i, j);
  std::sort(col.begin(), col.end());
  return col;
}

}  // namespace

double rmse(const Vector& ensemble_mean, const Vector& truth) {
  require_dim(truth.size(), ensemble_mean.size(), "rmse: truth");
  require(truth.size() > 0, "rmse: empty vectors");
  return std::sqrt((ensemble_mean - truth).squaredNorm() / static_cast<double>(truth.size()));
}

Vector ensemble_mean(const Ensemble& ensemble) {
  require(ensemble.rows() > 0, "ensemble_mean: empty ensemble");
  return ensemble.colwise().mean().transpose();
}

Vector ensemble_std(const Ensemble& ensemble) {
  const Index n = ensemble.rows();
  if (n < 2) return Vector::Zero(ensemble.cols());
  const Vector mean = ensemble_mean(ensemble);
  const Ensemble centered = ensemble.rowwise() - mean.transpose();
  return (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
}

double spread(const Ensemble& ensemble) {
  require(ensemble.rows() >= 2, "spread: ensemble needs at least 2 particles");
  const Vector sd = ensemble_std(ensemble);
  return std::sqrt(sd.squaredNorm() / static_cast<double>(ensemble.cols()));
}

double sorted_quantile(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "sorted_quantile: empty sample");
  require(p >= 0.0 && p <= 1.0, "sorted_quantile: p must be in [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double coverage(const Ensemble& ensemble, const Vector& truth, double lower, double upper) {
  require(ensemble.rows() >= 2, "coverage: ensemble needs at least 2 particles");
  require_dim(truth.size(), ensemble.cols(), "coverage: truth");
  Index hits = 0;
  for (Index j = 0; j < ensemble.cols(); ++j) {
    const auto col = sorted_column(ensemble, j);
    const double lo = sorted_quantile(col, lower);
    const double hi = sorted_quantile(col, upper);
    if (truth[j] >= lo && truth[j] <= hi) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ensemble.cols());
}

double crps(std::span<const double> samples, double truth, CrpsEstimator estimator) {
  require(!samples.empty(), "crps: empty sample set");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return crps_sorted(sorted, truth, estimator);
}

double crps(const Ensemble& ensemble, const Vector& truth, CrpsEstimator estimator) {
  require(ensemble.rows() >= 1, "crps: empty sample set");
  require_dim(truth.size(), ensemble.cols(), "crps: truth");
  double total = 0.0;
  for (Index j = 0; j < ensemble.cols(); ++j) total += crps_sorted(sorted_column(ensemble, j), truth[j], estimator);
  return total / static_cast<double>(ensemble.cols());
}

double crps_gaussian(double mean, double std, double truth) {
  if (std <= 0.0) return std::abs(truth - mean);
  const double z = (truth - mean) / std;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

MetricRow evaluate_ensemble(int k, const Ensemble& ensemble, const Vector& truth) {
  MetricRow row;
  row.k = k;
  row.rmse = rmse(ensemble_mean(ensemble), truth);
  row.spread = spread(ensemble);
  row.coverage = coverage(ensemble, truth);
  row.crps = crps(ensemble, truth);
  return row;
}

MetricRow evaluate_gaussian(int k, const Vector& mean, const Matrix& cov, const Vector& truth) {
  require_dim(truth.size(), mean.size(), "evaluate_gaussian: truth");
  require(cov.rows() == mean.size() && cov.cols() == mean.size(), "evaluate_gaussian: covariance shape");
  MetricRow row;
  row.k = k;
  row.rmse = rmse(mean, truth);
  const double d = static_cast<double>(mean.size());
  row.spread = std::sqrt(std::max(0.0, cov.trace()) / d);
  double hits = 0.0;
  double score = 0.0;
  for (Index j = 0; j < mean.size(); ++j) {
    const double sd = std::sqrt(std::max(0.0, cov(j, j)));
    if (std::abs(truth[j] - mean[j]) <= kZ975 * sd) hits += 1.0;
    score += crps_gaussian(mean[j], sd, truth[j]);
  }
  row.coverage = hits / d;
  row.crps = score / d;
  return row;
}

MetricRow time_average(std::span<const MetricRow> rows) {
  MetricRow avg;
  if (rows.empty()) return avg;
  for (const auto& r : rows) {
    avg.rmse += r.rmse;
    avg.spread += r.spread;
    avg.coverage += r.coverage;
    avg.crps += r.crps;
  }
  const double n = static_cast<double>(rows.size());
  avg.rmse /= n;
  avg.spread /= n;
  avg.coverage /= n;
  avg.crps /= n;
  return avg;
}

}  // namespace ssls
