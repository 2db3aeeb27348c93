#pragma once

#include "ssls/metrics.hpp"
#include "ssls/types.hpp"

#include <optional>

namespace ssls {

/// Output of one assimilation step (after observation y_k is absorbed).
struct AssimilationRecord {
  int k = 0;
  std::optional<Ensemble> ensemble;
  Vector mean;
  Vector std;
  Vector reference;
  Vector observation;
  MetricRow metrics;
};

inline AssimilationRecord make_record(int k, const Ensemble& ensemble, const Vector& reference,
                                      const Vector& observation, bool keep_snapshot) {
  AssimilationRecord rec;
  rec.k = k;
  rec.mean = ensemble_mean(ensemble);
  rec.std = ensemble_std(ensemble);
  rec.reference = reference;
  rec.observation = observation;
  rec.metrics = ensemble.rows() >= 2 ? evaluate_ensemble(k, ensemble, reference)
                                     : MetricRow{k, rmse(rec.mean, reference), 0.0, 0.0, crps(ensemble, reference)};
  if (keep_snapshot) rec.ensemble = ensemble;
  return rec;
}

}  // namespace ssls
