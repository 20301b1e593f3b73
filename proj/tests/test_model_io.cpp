#include <doctest.h>

#include <functional>
#include <string>

#include "eadmnc/detector.hpp"
#include "eadmnc/errors.hpp"
#include "eadmnc/model_io.hpp"
#include "eadmnc/synthetic.hpp"
#include "eadmnc/tree.hpp"
#include "test_helpers.hpp"

using namespace eadmnc;
using testutil::TempDir;

namespace {

AdmncModel fitted_model(std::uint64_t seed) {
  const Dataset ds = generate_synthetic(400, 2, 3, 2, 0.0, seed);
  DetectorConfig cfg;
  cfg.workers = 1;
  cfg.seed = seed;
  cfg.sgd.seed = seed;
  return fit(ds, cfg);
}

void check_same_tree(const TreeNode& a, const TreeNode& b) {
  CHECK(a.count == b.count);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
  CHECK(a.num_vars == b.num_vars);
  REQUIRE(a.is_leaf() == b.is_leaf());
  if (!a.is_leaf()) {
    CHECK(a.split->feature == b.split->feature);
    CHECK(a.split->categorical == b.split->categorical);
    CHECK(a.split->threshold == b.split->threshold);
    CHECK(a.split->left_levels == b.split->left_levels);
    check_same_tree(*a.left, *b.left);
    check_same_tree(*a.right, *b.right);
  }
}

}  // namespace

TEST_CASE("model bundle round trips through json") {
  TempDir tmp;
  const AdmncModel m = fitted_model(19);
  ModelBundle bundle;
  bundle.model = m;
  bundle.thresholds = Thresholds{0.1, 0.4};
  bundle.config = {{"note", "test"}};
  bundle.seed = 19;
  const std::string path = tmp.file("model.json");
  save_model(bundle, path);

  const ModelBundle back = load_model(path);
  CHECK(back.seed == 19);
  CHECK(back.thresholds.adt == 0.1);
  CHECK(back.thresholds.ndt == 0.4);
  CHECK(back.config.at("note") == "test");
  CHECK(back.model.anomaly_threshold == m.anomaly_threshold);
  CHECK(back.model.rule1_log_pdf_default == m.rule1_log_pdf_default);
  CHECK(back.model.gmm.weights == m.gmm.weights);
  CHECK(back.model.gmm.means == m.gmm.means);
  CHECK(back.model.gmm.covariances == m.gmm.covariances);
  CHECK(back.model.categorical.w == m.categorical.w);
  CHECK(back.model.schema.continuous == m.schema.continuous);
  REQUIRE(back.model.standardization_stats.size() ==
          m.standardization_stats.size());
  for (std::size_t i = 0; i < m.standardization_stats.size(); ++i) {
    CHECK(back.model.standardization_stats[i].mean ==
          m.standardization_stats[i].mean);
    CHECK(back.model.standardization_stats[i].stddev ==
          m.standardization_stats[i].stddev);
  }

  // the reloaded model scores records identically
  const Dataset probe = generate_synthetic(50, 2, 3, 2, 0.3, 77);
  for (const auto& r : probe.records) {
    const AnomalyScore a = score(m, r);
    const AnomalyScore b = score(back.model, r);
    CHECK(a.total == b.total);
    CHECK(a.log_continuous == b.log_continuous);
    CHECK(a.log_categorical == b.log_categorical);
  }
}

TEST_CASE("tree round trips through json") {
  TempDir tmp;
  const Dataset ds = generate_synthetic(600, 2, 3, 2, 0.2, 7);
  const AdmncModel m = fitted_model(7);
  const auto scores = score_all(m, ds, 1);
  const auto targets = rank_estimators_from(scores, Thresholds{});
  TreeConfig cfg;
  cfg.workers = 1;
  const SurrogateTree tree = build_full_tree(ds, targets, cfg, Thresholds{});

  const std::string path = tmp.file("tree.json");
  save_tree(tree, path);
  const SurrogateTree back = load_tree(path);
  CHECK(back.total_count == tree.total_count);
  CHECK(back.thresholds.adt == tree.thresholds.adt);
  CHECK(back.thresholds.ndt == tree.thresholds.ndt);
  check_same_tree(*tree.root, *back.root);

  // quality metrics survive the round trip bit for bit
  const ComplexityMetrics qa = quality(tree, 1e-4);
  const ComplexityMetrics qb = quality(back, 1e-4);
  CHECK(qa.wv == qb.wv);
  CHECK(qa.nv_total == qb.nv_total);
  CHECK(qa.num_clusters == qb.num_clusters);
}

TEST_CASE("scores csv carries all columns and the flag bit") {
  TempDir tmp;
  std::vector<AnomalyScore> scores{{-1.0, -2.0, -3.0}, {-10.0, -20.0, -30.0}};
  std::vector<EstimatorTarget> targets{{0, 0.3}, {1, 0.0005}};
  const std::string path = tmp.file("scores.csv");
  save_scores_csv(scores, targets, -5.0, path);
  const std::string content = testutil::read_file(path);
  CHECK(content.find("index,log_continuous,log_categorical,total,estimator,flagged") ==
        0);
  CHECK(content.find("0,-1,-2,-3,0.29999999999999999,0") != std::string::npos);
  CHECK(content.find("1,-10,-20,-30,0.00050000000000000001,1") != std::string::npos);
}

TEST_CASE("report json exposes the structured fields") {
  Report rep;
  rep.anomaly_index = 12;
  rep.detection_number = 3;
  rep.kind = Report::Kind::combined;
  rep.score = {-1.5, -2.5, -4.0};
  rep.predicted_component = 1;
  rep.component_log_pdfs = {-3.0, -1.0};
  rep.avg_estimator = 0.61;
  RuleVerdict v;
  v.rule = RuleId::tiny_component;
  v.fired = true;
  v.assigned_component = 1;
  v.component_share = 0.004;
  v.threshold_used = 0.01;
  rep.verdicts = {v};
  CategoricalFinding f;
  f.j = 2;
  f.feature = "proto";
  f.coord_level = "udp";
  f.record_value = "udp";
  f.y_bit = true;
  f.estimator = 0.12;
  f.involved_continuous = {{"dur", 3.25}};
  rep.findings = {f};
  rep.summary_text = "text";

  const nlohmann::json j = report_to_json(rep);
  CHECK(j.at("anomaly_index") == 12);
  CHECK(j.at("detection_number") == 3);
  CHECK(j.at("kind") == "combined");
  CHECK(j.at("score").at("total") == -4.0);
  CHECK(j.at("predicted_component") == 1);
  CHECK(j.at("avg_estimator") == 0.61);
  REQUIRE(j.at("verdicts").size() == 1);
  CHECK(j.at("verdicts")[0].at("rule") == "tiny_component");
  CHECK(j.at("verdicts")[0].at("fired") == true);
  CHECK(j.at("verdicts")[0].at("component_share") == 0.004);
  REQUIRE(j.at("findings").size() == 1);
  CHECK(j.at("findings")[0].at("feature") == "proto");
  CHECK(j.at("findings")[0].at("involved_continuous").at("feature") == "dur");
  CHECK(j.at("findings")[0].at("involved_continuous").at("value") == 3.25);
  CHECK(j.at("summary_text") == "text");
}

TEST_CASE("loading rejects malformed or missing bundles") {
  TempDir tmp;
  CHECK_THROWS_AS(load_model(tmp.file("absent.json")), LoadError);

  const std::string garbled = tmp.file("garbled.json");
  testutil::write_file(garbled, "{\"format_version\": 999}");
  CHECK_THROWS_AS(load_model(garbled), LoadError);

  const std::string broken = tmp.file("broken.json");
  testutil::write_file(broken, "not json at all");
  CHECK_THROWS_AS(load_model(broken), LoadError);
}

TEST_CASE("schema json survives unusual characters") {
  Schema s;
  s.continuous = {"a,b", "c\"d"};
  s.categoricals.push_back({"k", {"x,y", "line\nbreak", "quote\""}});
  s.label_column = "L";
  s.anomalous_values = {"yes", "1"};
  const nlohmann::json j = schema_to_json(s);
  const Schema back = schema_from_json(j);
  CHECK(back.continuous == s.continuous);
  CHECK(back.categoricals[0].levels == s.categoricals[0].levels);
  CHECK(back.anomalous_values == s.anomalous_values);
}
