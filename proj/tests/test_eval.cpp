#include <doctest.h>

#include <cmath>
#include <random>

#include "eadmnc/eval.hpp"
#include "eadmnc/synthetic.hpp"
#include "test_helpers.hpp"

using namespace eadmnc;

namespace {

// Pair-counting reference: P(anomalous scores below normal), ties half.
double auroc_pairs(const std::vector<double>& s, const std::vector<Label>& l) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != Label::anomalous) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != Label::normal) continue;
      ++pairs;
      if (s[i] < s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / double(pairs);
}

std::vector<Label> labels_from(const std::string& pattern) {
  std::vector<Label> out;
  for (char c : pattern)
    out.push_back(c == 'a' ? Label::anomalous : Label::normal);
  return out;
}

}  // namespace

TEST_CASE("auroc handles ties with average ranks") {
  CHECK(auroc({1.0, 2.0, 2.0, 3.0}, labels_from("aann")) ==
        doctest::Approx(0.875).epsilon(1e-12));
}

TEST_CASE("auroc endpoints") {
  CHECK(auroc({-5.0, -4.0, 1.0, 2.0}, labels_from("aann")) == 1.0);
  CHECK(auroc({1.0, 2.0, -5.0, -4.0}, labels_from("aann")) == 0.0);
  CHECK(auroc({1.0, 1.0, 1.0, 1.0}, labels_from("aann")) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("auroc is invariant under monotone transforms") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s;
  std::vector<Label> l;
  for (int i = 0; i < 200; ++i) {
    s.push_back(g(rng) + (i % 5 == 0 ? -1.0 : 0.0));
    l.push_back(i % 5 == 0 ? Label::anomalous : Label::normal);
  }
  const double base = auroc(s, l);
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(v / 10.0) * 3.0 + 7.0);
  CHECK(auroc(t, l) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("auroc matches the pair-counting oracle with heavy ties") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> v(0, 9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> s;
    std::vector<Label> l;
    for (int i = 0; i < 300; ++i) {
      s.push_back(double(v(rng)));
      l.push_back(u(rng) < 0.3 ? Label::anomalous : Label::normal);
    }
    l[0] = Label::anomalous;
    l[1] = Label::normal;
    CHECK(auroc(s, l) == doctest::Approx(auroc_pairs(s, l)).epsilon(1e-12));
  }
}

TEST_CASE("auroc rejects degenerate inputs") {
  CHECK_THROWS(auroc({1.0, 2.0}, labels_from("aa")));
  CHECK_THROWS(auroc({1.0, 2.0}, labels_from("nn")));
  CHECK_THROWS(auroc({1.0, 2.0, 3.0}, labels_from("an")));
}

TEST_CASE("explanation fractions count report kinds over flagged records") {
  std::vector<Report> reports(5);
  reports[0].kind = Report::Kind::path;
  reports[1].kind = Report::Kind::combined;
  reports[2].kind = Report::Kind::combined;
  reports[3].kind = Report::Kind::path;
  reports[4].kind = Report::Kind::combined;
  const auto [fp, fc] = explanation_fraction(reports, 5);
  CHECK(fp == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(fc == doctest::Approx(0.6).epsilon(1e-15));

  const auto [np, nc] = explanation_fraction({}, 0);
  CHECK(std::isnan(np));
  CHECK(std::isnan(nc));
}

TEST_CASE("csv row format and missing-value rendering") {
  CHECK(eval_row_csv_header() ==
        "dataset,repetitions,auroc_mean,auroc_std,mse_mean,mse_std,ndt,"
        "wv_pruned,clusters_pruned,nv_pruned,q_pruned,"
        "wv_full,clusters_full,nv_full,q_full,fraction_path,fraction_combined");
  EvalRow row;
  row.dataset = "demo";
  row.repetitions = 2;
  row.auroc_mean = 0.875;
  row.auroc_std = 0.01;
  row.mse_mean = 0.004;
  row.ndt = 0.3;
  row.fraction_path = std::nan("");
  row.fraction_combined = std::nan("");
  const std::string line = eval_row_csv(row);
  CHECK(line.find("demo,2,0.875,0.01,0.004,") == 0);
  CHECK(line.find("n/a") != std::string::npos);
  // both missing fractions render as n/a at the tail
  CHECK(line.rfind("n/a,n/a") == line.size() - 7);
}

TEST_CASE("protocol aggregates repetitions deterministically") {
  const Dataset ds = generate_synthetic(2500, 2, 5, 3, 0.1, 123);
  EvalConfig cfg;
  cfg.dataset_name = "synthetic";
  cfg.detector.workers = 1;
  cfg.tree.workers = 1;
  cfg.seed = 5;

  std::vector<std::size_t> reps_seen;
  RunSink sink = [&](const RunOutputs& run) {
    reps_seen.push_back(run.rep);
    CHECK(run.scores.size() == run.test.size());
    CHECK(run.targets.size() == run.test.size());
    CHECK(run.full_tree.total_count == run.test.size());
    CHECK(run.pruned_tree.total_count == run.test.size());
  };
  const EvalRow a = run_protocol(ds, cfg, 2, sink);
  CHECK(reps_seen == std::vector<std::size_t>{0, 1});
  CHECK(a.dataset == "synthetic");
  CHECK(a.repetitions == 2);
  CHECK(a.auroc_mean > 0.9);  // planted anomalies are easy
  CHECK(a.auroc_std >= 0.0);
  CHECK(a.mse_mean >= 0.0);
  CHECK(a.ndt == 0.3);
  CHECK(a.clusters_pruned <= a.clusters_full);
  CHECK(a.nv_pruned <= a.nv_full);
  CHECK(a.q_pruned >= a.q_full - 1e-12);
  // report kinds partition the flagged set
  CHECK(a.fraction_path + a.fraction_combined == doctest::Approx(1.0).epsilon(1e-9));

  const EvalRow b = run_protocol(ds, cfg, 2, nullptr);
  CHECK(a.auroc_mean == b.auroc_mean);
  CHECK(a.auroc_std == b.auroc_std);
  CHECK(a.mse_mean == b.mse_mean);
  CHECK(a.wv_pruned == b.wv_pruned);
  CHECK(a.q_full == b.q_full);
  CHECK(a.fraction_path == b.fraction_path);
}

TEST_CASE("single repetition reports zero spread") {
  const Dataset ds = generate_synthetic(1500, 2, 4, 2, 0.1, 321);
  EvalConfig cfg;
  cfg.dataset_name = "one";
  cfg.detector.workers = 1;
  cfg.tree.workers = 1;
  const EvalRow row = run_protocol(ds, cfg, 1);
  CHECK(row.repetitions == 1);
  CHECK(row.auroc_std == 0.0);
  CHECK(row.mse_std == 0.0);
}

TEST_CASE("different master seeds change the splits") {
  const Dataset ds = generate_synthetic(1500, 2, 4, 2, 0.1, 11);
  EvalConfig cfg;
  cfg.dataset_name = "s";
  cfg.detector.workers = 1;
  cfg.tree.workers = 1;
  cfg.seed = 1;
  const EvalRow a = run_protocol(ds, cfg, 1);
  cfg.seed = 2;
  const EvalRow b = run_protocol(ds, cfg, 1);
  CHECK(a.auroc_mean != b.auroc_mean);
}
