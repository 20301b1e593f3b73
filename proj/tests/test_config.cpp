#include <doctest.h>

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "eadmnc/config.hpp"
#include "eadmnc/errors.hpp"
#include "test_helpers.hpp"

using namespace eadmnc;
using nlohmann::json;

TEST_CASE("empty config yields the documented defaults") {
  const RunConfig cfg = config_from_json(json::object());
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.seed == 0);
  CHECK(cfg.workers == 0);
  CHECK(cfg.train_fraction == 0.7);
  CHECK(cfg.repetitions == 5);
  CHECK(cfg.lambda == 1e-4);
  CHECK(cfg.detector.gmm_components == 2);
  CHECK(cfg.detector.gmm_subset_fraction == 0.2);
  CHECK(cfg.detector.em_max_iter == 100);
  CHECK(cfg.detector.target_ratio == 0.05);
  CHECK(cfg.detector.sgd.learning_rate == 0.1);
  CHECK(cfg.detector.sgd.batch_size == 256);
  CHECK(cfg.detector.sgd.epochs == 10);
  CHECK(cfg.detector.sgd.l2 == 1e-4);
  CHECK(cfg.thresholds.adt == 0.05);
  CHECK(cfg.thresholds.ndt == 0.30);
  CHECK(cfg.tree.l_max == 5);
  CHECK(cfg.tree.bins == 40);
  CHECK(cfg.tree.min_leaf == 1);
  CHECK(cfg.explain.t_filter == 0.40);
  CHECK(std::isnan(cfg.explain.log_pdf_threshold));
  CHECK(cfg.explain.tiny_fraction == 0.01);
  CHECK(cfg.explain.top_n == 400);
  CHECK(cfg.synth.n == 20000);
  CHECK(cfg.synth.d_cont == 4);
  CHECK(cfg.synth.d_cat == 28);
  CHECK(cfg.synth.nv == 4);
  CHECK(cfg.synth.anomaly_ratio == 0.1);
}

TEST_CASE("name defaults to the dataset stem") {
  const RunConfig cfg =
      config_from_json(json{{"dataset", "/data/abalone_9.csv"}});
  CHECK(cfg.name == "abalone_9");
  const RunConfig named =
      config_from_json(json{{"dataset", "/data/x.csv"}, {"name", "custom"}});
  CHECK(named.name == "custom");
}

TEST_CASE("master seed propagates into nested components") {
  const RunConfig cfg = config_from_json(json{{"seed", 42}});
  CHECK(cfg.seed == 42);
  CHECK(cfg.detector.seed == 42);
  CHECK(cfg.detector.sgd.seed == 42);

  const RunConfig ov = config_from_json(
      json{{"seed", 42}, {"detector", {{"sgd", {{"seed", 7}}}}}});
  CHECK(ov.detector.sgd.seed == 7);
  CHECK(ov.detector.seed == 42);
}

TEST_CASE("nested values parse into their fields") {
  const json j{{"thresholds", {{"adt", 0.1}, {"ndt", 0.5}}},
               {"tree", {{"l_max", 3}, {"bins", 16}}},
               {"detector", {{"gmm_components", 4}, {"sgd", {{"epochs", 2}}}}},
               {"explain", {{"t_filter", 0.25}, {"top_n", 10}}},
               {"synth", {{"n", 100}, {"nv", 2}}},
               {"lambda", 0.01},
               {"workers", 3}};
  const RunConfig cfg = config_from_json(j);
  CHECK(cfg.thresholds.adt == 0.1);
  CHECK(cfg.thresholds.ndt == 0.5);
  CHECK(cfg.tree.l_max == 3);
  CHECK(cfg.tree.bins == 16);
  CHECK(cfg.detector.gmm_components == 4);
  CHECK(cfg.detector.sgd.epochs == 2);
  CHECK(cfg.explain.t_filter == 0.25);
  CHECK(cfg.explain.top_n == 10);
  CHECK(cfg.synth.n == 100);
  CHECK(cfg.synth.nv == 2);
  CHECK(cfg.lambda == 0.01);
  CHECK(cfg.workers == 3);
}

TEST_CASE("explicit log-pdf threshold round trips, null stays automatic") {
  const RunConfig a =
      config_from_json(json{{"explain", {{"log_pdf_threshold", -12.5}}}});
  CHECK(a.explain.log_pdf_threshold == -12.5);
  const RunConfig b =
      config_from_json(json{{"explain", {{"log_pdf_threshold", nullptr}}}});
  CHECK(std::isnan(b.explain.log_pdf_threshold));
}

TEST_CASE("unknown keys are reported with their field paths") {
  try {
    config_from_json(json{{"detector", {{"gmm_komponents", 3}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("detector.gmm_komponents") != std::string::npos);
  }
}

TEST_CASE("all violations are collected into one error") {
  try {
    config_from_json(json{{"lambda", -1.0},
                          {"bogus", 1},
                          {"explain", {{"t_filter", 1.5}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3 problem") != std::string::npos);
    CHECK(msg.find("lambda") != std::string::npos);
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("explain.t_filter") != std::string::npos);
  }
}

TEST_CASE("type mismatches name the field") {
  try {
    config_from_json(json{{"seed", "abc"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("range violations cover thresholds and fractions") {
  CHECK_THROWS_AS(config_from_json(json{{"train_fraction", 1.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"thresholds", {{"adt", 0.5}, {"ndt", 0.2}}}}),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"detector", {{"gmm_components", 0}}}}),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"synth", {{"anomaly_ratio", 1.5}}}}),
                  ConfigError);
  CHECK_NOTHROW(config_from_json(json{{"synth", {{"anomaly_ratio", 0.7}}}}));
  CHECK_THROWS_AS(config_from_json(json{{"tree", {{"bins", 1}}}}), ConfigError);
}

TEST_CASE("effective config echo can be parsed back unchanged") {
  const json j{{"dataset", "d.csv"},
               {"schema", "s.json"},
               {"seed", 9},
               {"lambda", 0.001},
               {"thresholds", {{"adt", 0.1}, {"ndt", 0.4}}}};
  const RunConfig cfg = config_from_json(j);
  const json echo = effective_config_json(cfg);
  const RunConfig back = config_from_json(echo);
  CHECK(back.dataset == cfg.dataset);
  CHECK(back.schema == cfg.schema);
  CHECK(back.seed == cfg.seed);
  CHECK(back.lambda == cfg.lambda);
  CHECK(back.thresholds.adt == cfg.thresholds.adt);
  CHECK(back.thresholds.ndt == cfg.thresholds.ndt);
  CHECK(back.detector.sgd.seed == cfg.detector.sgd.seed);
  CHECK(back.explain.top_n == cfg.explain.top_n);
}

TEST_CASE("load_config names a missing file") {
  try {
    load_config("/nonexistent/cfg.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/cfg.json") != std::string::npos);
  }
}

TEST_CASE("load_config reads a file and applies validation") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("cfg.json");
  testutil::write_file(path, R"({"seed": 3, "tree": {"l_max": 2}})");
  const RunConfig cfg = load_config(path);
  CHECK(cfg.seed == 3);
  CHECK(cfg.tree.l_max == 2);

  const std::string bad = tmp.file("bad.json");
  testutil::write_file(bad, "{ not json");
  CHECK_THROWS_AS(load_config(bad), ConfigError);
}
