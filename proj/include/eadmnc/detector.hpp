#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "eadmnc/categorical.hpp"
#include "eadmnc/gmm.hpp"
#include "eadmnc/schema.hpp"

namespace eadmnc {

// Rank thresholds for the anomalous / transition / normal bands.
struct Thresholds {
  double adt = 0.05;
  double ndt = 0.30;
  void validate() const;  // 0 < adt <= ndt <= 1
};

struct AnomalyScore {
  double log_continuous;   // log P(x) under the mixture
  double log_categorical;  // log P(y | x) under the logistic model
  double total;            // sum; lower means more anomalous
};

// Per-record training target for the surrogate tree: ascending-rank share of
// the score, clamped at ndt.
struct EstimatorTarget {
  std::size_t index;
  double estimator;
};

struct DetectorConfig {
  std::size_t gmm_components = 2;
  double gmm_subset_fraction = 0.2;  // k-means init subset
  std::size_t em_max_iter = 100;
  double em_tol = 1e-6;
  SgdConfig sgd;
  double target_ratio = 0.05;  // calibration quantile for the anomaly threshold
  std::uint64_t seed = 0;
  int workers = 1;
  void validate() const;
};

struct AdmncModel {
  Schema schema;
  std::vector<FeatureStats> standardization_stats;
  GmmParams gmm;
  CategoricalModel categorical;
  double anomaly_threshold = 0.0;  // flagged iff total < threshold
  // Default cut for the "every component finds x unlikely" rule, kept in
  // log-space: 0.1% quantile of per-component log-pdfs over the training set.
  double rule1_log_pdf_default = 0.0;
};

// Trains the mixture and the conditional model on normal data (records
// labelled anomalous are rejected), then calibrates the anomaly threshold on
// the training scores. Records are taken in original units; standardization
// happens inside and its stats are stored on the model.
AdmncModel fit(const Dataset& train, const DetectorConfig& cfg);

// Scoring takes records in original units and standardizes internally.
AnomalyScore score(const AdmncModel& model, const MixedRecord& r);
std::vector<AnomalyScore> score_all(const AdmncModel& model, const Dataset& ds,
                                    int workers = 1);

// Quantile threshold over training scores: index floor(ratio * n), clamped to
// the last element. With ratio 0 nothing scores below the threshold.
double calibrate(const std::vector<double>& train_scores, double target_ratio);

std::vector<EstimatorTarget> rank_estimators_from(const std::vector<AnomalyScore>& scores,
                                                  const Thresholds& th);
std::vector<EstimatorTarget> rank_estimators(const AdmncModel& model, const Dataset& ds,
                                             const Thresholds& th, int workers = 1);

std::vector<std::pair<std::size_t, AnomalyScore>> top_anomalies_from(
    const std::vector<AnomalyScore>& scores, double threshold, std::size_t top_n);
std::vector<std::pair<std::size_t, AnomalyScore>> top_anomalies(const AdmncModel& model,
                                                                const Dataset& ds,
                                                                std::size_t top_n,
                                                                int workers = 1);

// Standardize one record's continuous block with the model's stats.
std::vector<double> standardize_record(const AdmncModel& model, const MixedRecord& r);

}  // namespace eadmnc
