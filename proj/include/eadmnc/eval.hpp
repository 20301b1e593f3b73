#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eadmnc/detector.hpp"
#include "eadmnc/explain.hpp"
#include "eadmnc/tree.hpp"

namespace eadmnc {

// Probability that a random anomalous record scores below a random normal
// one; ties count one half. Lower score means more anomalous.
double auroc(const std::vector<double>& scores, const std::vector<Label>& labels);

// Mean squared residual of leaf-mean predictions against the targets.
double tree_mse(const SurrogateTree& tree, const Dataset& ds,
                const std::vector<EstimatorTarget>& targets);

// (path reports / flagged, combined reports / flagged); NaN pair when nothing
// was flagged.
std::pair<double, double> explanation_fraction(const std::vector<Report>& reports,
                                               std::size_t flagged_count);

struct EvalConfig {
  std::string dataset_name;
  DetectorConfig detector;
  Thresholds thresholds;
  TreeConfig tree;
  ExplainConfig explain;
  double lambda = 1e-4;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

struct RunOutputs {
  std::size_t rep = 0;
  const AdmncModel& model;
  const Dataset& test;
  const std::vector<AnomalyScore>& scores;
  const std::vector<EstimatorTarget>& targets;
  const SurrogateTree& full_tree;
  const SurrogateTree& pruned_tree;
  const std::vector<Report>& reports;
};

struct EvalRow {
  std::string dataset;
  double auroc_mean = 0.0, auroc_std = 0.0;
  double mse_mean = 0.0, mse_std = 0.0;
  double ndt = 0.0;
  // complexity metrics averaged over repetitions
  double wv_pruned = 0.0, clusters_pruned = 0.0, nv_pruned = 0.0, q_pruned = 0.0;
  double wv_full = 0.0, clusters_full = 0.0, nv_full = 0.0, q_full = 0.0;
  double fraction_path = 0.0, fraction_combined = 0.0;
  std::size_t repetitions = 0;
};

using RunSink = std::function<void(const RunOutputs&)>;

// Repeats split -> fit -> score -> tree -> prune -> explain with seed + rep
// as the per-repetition seed and aggregates mean / population std. The sink,
// when given, sees each repetition's artifacts before they are discarded.
EvalRow run_protocol(const Dataset& ds, const EvalConfig& cfg, std::size_t repetitions,
                     const RunSink& sink = nullptr);

std::string eval_row_csv_header();
std::string eval_row_csv(const EvalRow& row);

}  // namespace eadmnc
