#include "eadmnc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "eadmnc/errors.hpp"

namespace eadmnc {

double auroc(const std::vector<double>& scores, const std::vector<Label>& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("auroc: scores and labels differ in length");
  std::size_t pos = 0, neg = 0;
  for (Label l : labels) {
    if (l == Label::anomalous) ++pos;
    else ++neg;
  }
  if (pos == 0 || neg == 0)
    throw ValidationError("auroc: both classes must be present");

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups, then the Mann-Whitney statistic
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t p = i; p <= j; ++p)
      if (labels[order[p]] == Label::anomalous) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u_above =
      rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  // u_above counts (anomalous > normal) pairs; we want the complement
  return 1.0 - u_above / (static_cast<double>(pos) * static_cast<double>(neg));
}

double tree_mse(const SurrogateTree& tree, const Dataset& ds,
                const std::vector<EstimatorTarget>& targets) {
  if (targets.size() != ds.size())
    throw ValidationError("tree_mse: targets do not align with the dataset");
  if (ds.size() == 0) throw ValidationError("tree_mse: empty dataset");
  double ss = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double r = targets[i].estimator - predict(tree, ds.records[i]).mean;
    ss += r * r;
  }
  return ss / static_cast<double>(ds.size());
}

std::pair<double, double> explanation_fraction(const std::vector<Report>& reports,
                                               std::size_t flagged_count) {
  if (flagged_count == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  std::size_t path = 0, combined = 0;
  for (const auto& r : reports) {
    if (r.kind == Report::Kind::path) ++path;
    else ++combined;
  }
  const double denom = static_cast<double>(flagged_count);
  return {static_cast<double>(path) / denom, static_cast<double>(combined) / denom};
}

namespace {

struct MeanStd {
  double mean = 0.0, stddev = 0.0;
};

MeanStd aggregate(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    const double d = x - out.mean;
    ss += d * d;
  }
  out.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

}  // namespace

EvalRow run_protocol(const Dataset& ds, const EvalConfig& cfg, std::size_t repetitions,
                     const RunSink& sink) {
  if (repetitions == 0) throw ValidationError("run_protocol: repetitions must be >= 1");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw ValidationError("run_protocol: train_fraction must lie in (0, 1)");
  cfg.thresholds.validate();
  cfg.explain.validate();

  std::vector<double> aurocs, mses;
  std::vector<double> wv_p, cl_p, nv_p, q_p, wv_f, cl_f, nv_f, q_f;
  std::vector<double> frac_path, frac_combined;

  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    const std::uint64_t rep_seed = cfg.seed + rep;
    auto [train, test] = split(ds, cfg.train_fraction, rep_seed);
    if (train.size() == 0 || test.size() == 0)
      throw ValidationError("run_protocol: split produced an empty side");

    DetectorConfig dcfg = cfg.detector;
    dcfg.seed = rep_seed;
    dcfg.sgd.seed = rep_seed;
    const AdmncModel model = fit(train, dcfg);

    const std::vector<AnomalyScore> scores = score_all(model, test, dcfg.workers);
    std::vector<double> totals(scores.size());
    bool both_classes = false, saw_pos = false, saw_neg = false;
    std::vector<Label> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      totals[i] = scores[i].total;
      labels[i] = test.records[i].label;
      (labels[i] == Label::anomalous ? saw_pos : saw_neg) = true;
    }
    both_classes = saw_pos && saw_neg;
    if (both_classes) aurocs.push_back(auroc(totals, labels));

    const auto targets = rank_estimators_from(scores, cfg.thresholds);
    const SurrogateTree full = build_full_tree(test, targets, cfg.tree, cfg.thresholds);
    const SurrogateTree pruned = prune(full, cfg.lambda);
    mses.push_back(tree_mse(pruned, test, targets));

    const ComplexityMetrics mp = quality(pruned, cfg.lambda);
    const ComplexityMetrics mf = quality(full, cfg.lambda);
    wv_p.push_back(mp.wv);
    cl_p.push_back(static_cast<double>(mp.num_clusters));
    nv_p.push_back(static_cast<double>(mp.nv_total));
    q_p.push_back(mp.q);
    wv_f.push_back(mf.wv);
    cl_f.push_back(static_cast<double>(mf.num_clusters));
    nv_f.push_back(static_cast<double>(mf.nv_total));
    q_f.push_back(mf.q);

    const auto tops =
        top_anomalies_from(scores, model.anomaly_threshold, cfg.explain.top_n);
    const auto reports = explain_all(model, pruned, test, tops, cfg.explain);
    const auto [fp, fc] = explanation_fraction(reports, tops.size());
    if (!std::isnan(fp)) {
      frac_path.push_back(fp);
      frac_combined.push_back(fc);
    }

    if (sink)
      sink(RunOutputs{rep, model, test, scores, targets, full, pruned, reports});
  }

  EvalRow row;
  row.dataset = cfg.dataset_name;
  row.repetitions = repetitions;
  row.ndt = cfg.thresholds.ndt;
  const MeanStd a = aggregate(aurocs);
  row.auroc_mean = aurocs.empty() ? std::numeric_limits<double>::quiet_NaN() : a.mean;
  row.auroc_std = aurocs.empty() ? std::numeric_limits<double>::quiet_NaN() : a.stddev;
  const MeanStd m = aggregate(mses);
  row.mse_mean = m.mean;
  row.mse_std = m.stddev;
  row.wv_pruned = aggregate(wv_p).mean;
  row.clusters_pruned = aggregate(cl_p).mean;
  row.nv_pruned = aggregate(nv_p).mean;
  row.q_pruned = aggregate(q_p).mean;
  row.wv_full = aggregate(wv_f).mean;
  row.clusters_full = aggregate(cl_f).mean;
  row.nv_full = aggregate(nv_f).mean;
  row.q_full = aggregate(q_f).mean;
  if (frac_path.empty()) {
    row.fraction_path = std::numeric_limits<double>::quiet_NaN();
    row.fraction_combined = std::numeric_limits<double>::quiet_NaN();
  } else {
    row.fraction_path = aggregate(frac_path).mean;
    row.fraction_combined = aggregate(frac_combined).mean;
  }
  return row;
}

std::string eval_row_csv_header() {
  return "dataset,repetitions,auroc_mean,auroc_std,mse_mean,mse_std,ndt,"
         "wv_pruned,clusters_pruned,nv_pruned,q_pruned,"
         "wv_full,clusters_full,nv_full,q_full,"
         "fraction_path,fraction_combined";
}

namespace {

std::string num_or_na(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string eval_row_csv(const EvalRow& row) {
  std::ostringstream os;
  os << row.dataset << "," << row.repetitions << "," << num_or_na(row.auroc_mean) << ","
     << num_or_na(row.auroc_std) << "," << num_or_na(row.mse_mean) << ","
     << num_or_na(row.mse_std) << "," << num_or_na(row.ndt) << ","
     << num_or_na(row.wv_pruned) << "," << num_or_na(row.clusters_pruned) << ","
     << num_or_na(row.nv_pruned) << "," << num_or_na(row.q_pruned) << ","
     << num_or_na(row.wv_full) << "," << num_or_na(row.clusters_full) << ","
     << num_or_na(row.nv_full) << "," << num_or_na(row.q_full) << ","
     << num_or_na(row.fraction_path) << "," << num_or_na(row.fraction_combined);
  return os.str();
}

}  // namespace eadmnc
