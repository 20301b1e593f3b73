#include "eadmnc/detector.hpp"

#include <algorithm>
#include <cmath>

#include "eadmnc/errors.hpp"
#include "eadmnc/parallel.hpp"

namespace eadmnc {

void Thresholds::validate() const {
  if (!(adt > 0.0 && adt <= ndt && ndt <= 1.0))
    throw ValidationError("thresholds must satisfy 0 < adt <= ndt <= 1");
}

void DetectorConfig::validate() const {
  if (gmm_components == 0) throw ValidationError("detector: gmm_components must be positive");
  if (!(gmm_subset_fraction > 0.0 && gmm_subset_fraction <= 1.0))
    throw ValidationError("detector: gmm_subset_fraction must lie in (0, 1]");
  if (em_max_iter == 0) throw ValidationError("detector: em_max_iter must be positive");
  if (!(em_tol >= 0.0)) throw ValidationError("detector: em_tol must be non-negative");
  if (!(target_ratio >= 0.0 && target_ratio <= 1.0))
    throw ValidationError("detector: target_ratio must lie in [0, 1]");
  sgd.validate();
}

std::vector<double> standardize_record(const AdmncModel& model, const MixedRecord& r) {
  const std::size_t d = model.schema.continuous_dim();
  if (r.x.size() != d)
    throw ValidationError("record has wrong continuous dimension for model");
  std::vector<double> x(d);
  for (std::size_t f = 0; f < d; ++f) {
    const auto& s = model.standardization_stats[f];
    x[f] = (r.x[f] - s.mean) / s.stddev;
  }
  return x;
}

namespace {

std::vector<std::vector<double>> continuous_matrix(const Dataset& ds) {
  std::vector<std::vector<double>> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(r.x);
  return out;
}

std::vector<AnomalyScore> score_standardized(const AdmncModel& model,
                                             const GmmDensity& density,
                                             const Dataset& std_ds, int workers) {
  const std::size_t n = std_ds.size();
  const std::size_t k = density.components();
  const std::size_t d = density.dim();
  std::vector<AnomalyScore> out(n);
  for_each_chunk(n, workers, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> lp(k), scratch(d);
    for (std::size_t i = b; i < e; ++i) {
      const auto& r = std_ds.records[i];
      density.component_log_pdfs(r.x, lp, scratch);
      for (std::size_t c = 0; c < k; ++c) lp[c] += density.log_weight(c);
      const double log_px = log_sum_exp(lp);
      const double log_py = log_cond_prob_levels(model.categorical, r.x, r.levels);
      out[i] = {log_px, log_py, log_px + log_py};
    }
  });
  return out;
}

}  // namespace

AdmncModel fit(const Dataset& train, const DetectorConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw TrainingError("fit: training set is empty");
  if (train.schema.continuous_dim() == 0 || train.schema.categorical_count() == 0)
    throw TrainingError("fit: the model needs both continuous and categorical features");
  for (const auto& r : train.records)
    if (r.label == Label::anomalous)
      throw TrainingError("fit: training set contains records labelled anomalous");
  if (cfg.gmm_components > train.size())
    throw TrainingError("fit: more mixture components than training records");

  const Dataset std_train = train.standardized() ? train : standardize(train);

  AdmncModel model;
  model.schema = train.schema;
  model.standardization_stats = std_train.standardization_stats;

  const auto data = continuous_matrix(std_train);
  GmmParams init = init_kmeans(data, cfg.gmm_components, cfg.gmm_subset_fraction,
                               cfg.seed, cfg.workers);
  EmTrace em = fit_em(data, std::move(init), cfg.em_max_iter, cfg.em_tol, cfg.workers);
  model.gmm = std::move(em.params);
  model.categorical = fit_sgd(std_train, cfg.sgd);

  GmmDensity density(model.gmm);
  const auto scores = score_standardized(model, density, std_train, cfg.workers);
  std::vector<double> totals(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) totals[i] = scores[i].total;
  model.anomaly_threshold = calibrate(totals, cfg.target_ratio);

  // 0.1% quantile of all per-component log-pdfs on the training set
  const std::size_t k = model.gmm.components();
  std::vector<double> comp_lps;
  comp_lps.reserve(train.size() * k);
  std::vector<double> lp(k), scratch(model.gmm.dim());
  for (const auto& r : std_train.records) {
    density.component_log_pdfs(r.x, lp, scratch);
    comp_lps.insert(comp_lps.end(), lp.begin(), lp.end());
  }
  std::sort(comp_lps.begin(), comp_lps.end());
  const std::size_t qi = std::min<std::size_t>(
      static_cast<std::size_t>(0.001 * static_cast<double>(comp_lps.size())),
      comp_lps.size() - 1);
  model.rule1_log_pdf_default = comp_lps[qi];
  return model;
}

AnomalyScore score(const AdmncModel& model, const MixedRecord& r) {
  GmmDensity density(model.gmm);
  const std::vector<double> x = standardize_record(model, r);
  const std::size_t k = density.components();
  std::vector<double> lp(k), scratch(density.dim());
  density.component_log_pdfs(x, lp, scratch);
  for (std::size_t c = 0; c < k; ++c) lp[c] += density.log_weight(c);
  const double log_px = log_sum_exp(lp);
  const double log_py = log_cond_prob_levels(model.categorical, x, r.levels);
  return {log_px, log_py, log_px + log_py};
}

std::vector<AnomalyScore> score_all(const AdmncModel& model, const Dataset& ds,
                                    int workers) {
  if (ds.standardized())
    throw ValidationError("score_all expects records in original units");
  if (ds.schema.continuous_dim() != model.schema.continuous_dim() ||
      ds.schema.categorical_count() != model.schema.categorical_count())
    throw ValidationError("dataset schema does not match the model");
  GmmDensity density(model.gmm);
  const std::size_t n = ds.size();
  const std::size_t k = density.components();
  const std::size_t d = density.dim();
  std::vector<AnomalyScore> out(n);
  for_each_chunk(n, workers, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> lp(k), scratch(d), x(d);
    for (std::size_t i = b; i < e; ++i) {
      const auto& r = ds.records[i];
      for (std::size_t f = 0; f < d; ++f) {
        const auto& s = model.standardization_stats[f];
        x[f] = (r.x[f] - s.mean) / s.stddev;
      }
      density.component_log_pdfs(x, lp, scratch);
      for (std::size_t c = 0; c < k; ++c) lp[c] += density.log_weight(c);
      const double log_px = log_sum_exp(lp);
      const double log_py = log_cond_prob_levels(model.categorical, x, r.levels);
      out[i] = {log_px, log_py, log_px + log_py};
    }
  });
  return out;
}

double calibrate(const std::vector<double>& train_scores, double target_ratio) {
  if (train_scores.empty()) throw ValidationError("calibrate: no scores");
  if (!(target_ratio >= 0.0 && target_ratio <= 1.0))
    throw ValidationError("calibrate: target_ratio must lie in [0, 1]");
  std::vector<double> sorted = train_scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t idx = std::min<std::size_t>(
      static_cast<std::size_t>(target_ratio * static_cast<double>(sorted.size())),
      sorted.size() - 1);
  return sorted[idx];
}

std::vector<EstimatorTarget> rank_estimators_from(const std::vector<AnomalyScore>& scores,
                                                  const Thresholds& th) {
  th.validate();
  const std::size_t n = scores.size();
  if (n == 0) throw ValidationError("rank_estimators: no scores");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].total != scores[b].total) return scores[a].total < scores[b].total;
    return a < b;
  });
  std::vector<EstimatorTarget> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]].total == scores[order[i]].total) ++j;
    // ties share the average of their 1-based ranks
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    const double est = std::min(avg_rank / static_cast<double>(n), th.ndt);
    for (std::size_t p = i; p <= j; ++p) out[order[p]] = {order[p], est};
    i = j + 1;
  }
  return out;
}

std::vector<EstimatorTarget> rank_estimators(const AdmncModel& model, const Dataset& ds,
                                             const Thresholds& th, int workers) {
  return rank_estimators_from(score_all(model, ds, workers), th);
}

std::vector<std::pair<std::size_t, AnomalyScore>> top_anomalies_from(
    const std::vector<AnomalyScore>& scores, double threshold, std::size_t top_n) {
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i].total < threshold) flagged.push_back(i);
  std::sort(flagged.begin(), flagged.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].total != scores[b].total) return scores[a].total < scores[b].total;
    return a < b;
  });
  if (flagged.size() > top_n) flagged.resize(top_n);
  std::vector<std::pair<std::size_t, AnomalyScore>> out;
  out.reserve(flagged.size());
  for (std::size_t i : flagged) out.emplace_back(i, scores[i]);
  return out;
}

std::vector<std::pair<std::size_t, AnomalyScore>> top_anomalies(const AdmncModel& model,
                                                                const Dataset& ds,
                                                                std::size_t top_n,
                                                                int workers) {
  return top_anomalies_from(score_all(model, ds, workers), model.anomaly_threshold, top_n);
}

}  // namespace eadmnc
