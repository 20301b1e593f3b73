#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eadmnc/config.hpp"
#include "eadmnc/dataset_io.hpp"
#include "eadmnc/errors.hpp"
#include "eadmnc/model_io.hpp"
#include "eadmnc/parallel.hpp"
#include "eadmnc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace eadmnc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("stage " + stage + ": " + e.what());
  }
}

struct CliOverrides {
  std::optional<std::string> dataset, schema, out, name, model;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> lambda;
};

RunConfig resolve_config(const std::string& config_path, const CliOverrides& ov,
                         bool config_required) {
  RunConfig cfg;
  if (!config_path.empty()) {
    if (!fs::exists(config_path))
      throw ConfigError("config file \"" + config_path + "\" does not exist");
    cfg = load_config(config_path);
  } else if (config_required) {
    throw ConfigError("--config is required for this command");
  }
  if (ov.dataset) cfg.dataset = *ov.dataset;
  if (ov.schema) cfg.schema = *ov.schema;
  if (ov.out) cfg.output_dir = *ov.out;
  if (ov.name) cfg.name = *ov.name;
  if (ov.seed) {
    cfg.seed = *ov.seed;
    cfg.detector.seed = *ov.seed;
    cfg.detector.sgd.seed = *ov.seed;
  }
  if (ov.lambda) cfg.lambda = *ov.lambda;
  if (ov.workers) {
    cfg.workers = *ov.workers;
  } else if (const char* env = std::getenv("EADMNC_WORKERS"); env && *env) {
    cfg.workers = std::atoi(env);
  }
  cfg.detector.workers = cfg.workers;
  cfg.tree.workers = cfg.workers;
  if (cfg.name.empty() && !cfg.dataset.empty())
    cfg.name = fs::path(cfg.dataset).stem().string();
  return cfg;
}

void ensure_out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir + "/effective_config.json",
                  effective_config_json(cfg).dump(2) + "\n");
}

Dataset load_input(const RunConfig& cfg) {
  return run_stage("load", [&] {
    if (cfg.dataset.empty()) throw LoadError("no dataset path given");
    if (!fs::exists(cfg.dataset))
      throw LoadError("dataset file \"" + cfg.dataset + "\" does not exist");
    Schema schema;
    if (!cfg.schema.empty()) {
      if (!fs::exists(cfg.schema))
        throw LoadError("schema file \"" + cfg.schema + "\" does not exist");
      schema = load_schema(cfg.schema);
    } else {
      throw LoadError("no schema path given");
    }
    return load_dataset(cfg.dataset, schema);
  });
}

Dataset training_view(const Dataset& ds) {
  Dataset out;
  out.schema = ds.schema;
  out.standardization_stats = ds.standardization_stats;
  for (const auto& r : ds.records)
    if (r.label != Label::anomalous) out.records.push_back(r);
  return out;
}

std::string model_path(const RunConfig& cfg, const CliOverrides& ov) {
  if (ov.model) return *ov.model;
  return cfg.output_dir + "/model.json";
}

int cmd_train(const RunConfig& cfg, const std::string& out_model) {
  ensure_out_dir(cfg);
  const Dataset ds = load_input(cfg);
  const Dataset train = training_view(ds);
  std::cerr << "training on " << train.size() << " of " << ds.size() << " records\n";
  const AdmncModel model = run_stage("train", [&] { return fit(train, cfg.detector); });
  run_stage("save-model", [&] {
    save_model({model, cfg.thresholds, effective_config_json(cfg), cfg.seed}, out_model);
    return 0;
  });
  std::cout << "model written to " << out_model << "\n";
  return kExitOk;
}

struct ScoredPipeline {
  ModelBundle bundle;
  Dataset ds;
  std::vector<AnomalyScore> scores;
  std::vector<EstimatorTarget> targets;
};

ScoredPipeline score_pipeline(const RunConfig& cfg, const std::string& mpath) {
  ScoredPipeline p;
  p.bundle = run_stage("load-model", [&] {
    if (!fs::exists(mpath))
      throw LoadError("model file \"" + mpath + "\" does not exist");
    return load_model(mpath);
  });
  p.ds = load_input(cfg);
  p.scores = run_stage("score", [&] { return score_all(p.bundle.model, p.ds, cfg.workers); });
  p.targets = run_stage("rank", [&] {
    return rank_estimators_from(p.scores, p.bundle.thresholds);
  });
  return p;
}

int cmd_score(const RunConfig& cfg, const std::string& mpath) {
  ensure_out_dir(cfg);
  ScoredPipeline p = score_pipeline(cfg, mpath);
  const std::string out = cfg.output_dir + "/scores.csv";
  save_scores_csv(p.scores, p.targets, p.bundle.model.anomaly_threshold, out);
  std::size_t flagged = 0;
  for (const auto& s : p.scores)
    if (s.total < p.bundle.model.anomaly_threshold) ++flagged;
  std::cout << "scored " << p.scores.size() << " records, " << flagged
            << " flagged; scores written to " << out << "\n";
  return kExitOk;
}

struct TreePipeline {
  ScoredPipeline scored;
  SurrogateTree full;
  SurrogateTree pruned;
};

TreePipeline tree_pipeline(const RunConfig& cfg, const std::string& mpath) {
  TreePipeline t{score_pipeline(cfg, mpath), {}, {}};
  t.full = run_stage("tree", [&] {
    return build_full_tree(t.scored.ds, t.scored.targets, cfg.tree,
                           t.scored.bundle.thresholds);
  });
  t.pruned = run_stage("prune", [&] { return prune(t.full, cfg.lambda); });
  return t;
}

void write_tree_artifacts(const RunConfig& cfg, const TreePipeline& t,
                          const std::string& dir) {
  const Schema& schema = t.scored.ds.schema;
  write_text_file(dir + "/tree.dot",
                  render_dot(t.full, t.scored.bundle.thresholds, schema, &t.pruned));
  write_text_file(dir + "/tree_pruned.dot",
                  render_dot(t.pruned, t.scored.bundle.thresholds, schema));
  save_tree(t.full, dir + "/tree.json");
  save_tree(t.pruned, dir + "/tree_pruned.json");
  const ComplexityMetrics mf = quality(t.full, cfg.lambda);
  const ComplexityMetrics mp = quality(t.pruned, cfg.lambda);
  nlohmann::json j;
  j["full"] = {{"wv", mf.wv},
               {"num_clusters", mf.num_clusters},
               {"nv_total", mf.nv_total},
               {"q", mf.q},
               {"lambda", mf.lambda}};
  j["pruned"] = {{"wv", mp.wv},
                 {"num_clusters", mp.num_clusters},
                 {"nv_total", mp.nv_total},
                 {"q", mp.q},
                 {"lambda", mp.lambda}};
  write_text_file(dir + "/complexity.json", j.dump(2) + "\n");
}

int cmd_tree(const RunConfig& cfg, const std::string& mpath) {
  ensure_out_dir(cfg);
  TreePipeline t = tree_pipeline(cfg, mpath);
  write_tree_artifacts(cfg, t, cfg.output_dir);
  const ComplexityMetrics mp = quality(t.pruned, cfg.lambda);
  const ComplexityMetrics mf = quality(t.full, cfg.lambda);
  std::cout << "full tree: " << mf.num_clusters << " leaves, nv=" << mf.nv_total
            << "; pruned: " << mp.num_clusters << " leaves, nv=" << mp.nv_total
            << "; dot files written to " << cfg.output_dir << "\n";
  return kExitOk;
}

void write_explanation_artifacts(const RunConfig& cfg, const TreePipeline& t,
                                 const std::vector<Report>& reports,
                                 const std::string& dir) {
  std::string txt;
  for (const auto& r : reports)
    if (r.kind == Report::Kind::path) txt += r.summary_text + "\n";
  write_text_file(dir + "/explanations.txt", txt);
  write_text_file(dir + "/report.html", render_html(reports));
  save_reports_json(reports, dir + "/reports.json");
  write_tree_artifacts(cfg, t, dir);
}

int cmd_explain(const RunConfig& cfg, const std::string& mpath) {
  ensure_out_dir(cfg);
  TreePipeline t = tree_pipeline(cfg, mpath);
  const auto tops = top_anomalies_from(t.scored.scores,
                                       t.scored.bundle.model.anomaly_threshold,
                                       cfg.explain.top_n);
  const auto reports = run_stage("explain", [&] {
    return explain_all(t.scored.bundle.model, t.pruned, t.scored.ds, tops, cfg.explain);
  });
  write_explanation_artifacts(cfg, t, reports, cfg.output_dir);
  std::size_t paths = 0;
  for (const auto& r : reports)
    if (r.kind == Report::Kind::path) ++paths;
  std::cout << "explained " << reports.size() << " detections (" << paths << " path, "
            << (reports.size() - paths) << " combined); artifacts written to "
            << cfg.output_dir << "\n";
  return kExitOk;
}

int cmd_synth(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const Dataset ds = run_stage("synth", [&] {
    return generate_synthetic(cfg.synth.n, cfg.synth.d_cont, cfg.synth.d_cat,
                              cfg.synth.nv, cfg.synth.anomaly_ratio, cfg.seed,
                              cfg.workers);
  });
  const std::string csv = cfg.output_dir + "/synthetic.csv";
  const std::string schema = cfg.output_dir + "/synthetic.schema.json";
  save_dataset_csv(ds, csv);
  save_schema(ds.schema, schema);
  std::size_t anomalies = 0;
  for (const auto& r : ds.records)
    if (r.label == Label::anomalous) ++anomalies;
  std::cout << "generated " << ds.size() << " records (" << anomalies
            << " anomalous) to " << csv << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const Dataset ds = load_input(cfg);
  EvalConfig ecfg;
  ecfg.dataset_name = cfg.name;
  ecfg.detector = cfg.detector;
  ecfg.thresholds = cfg.thresholds;
  ecfg.tree = cfg.tree;
  ecfg.explain = cfg.explain;
  ecfg.lambda = cfg.lambda;
  ecfg.train_fraction = cfg.train_fraction;
  ecfg.seed = cfg.seed;

  RunSink sink = [&](const RunOutputs& run) {
    const std::string dir = cfg.output_dir + "/run_" + std::to_string(run.rep);
    fs::create_directories(dir);
    save_model({run.model, cfg.thresholds, effective_config_json(cfg), cfg.seed},
               dir + "/model.json");
    save_scores_csv(run.scores, run.targets, run.model.anomaly_threshold,
                    dir + "/scores.csv");
    write_text_file(dir + "/tree.dot", render_dot(run.full_tree, cfg.thresholds,
                                                  run.test.schema, &run.pruned_tree));
    write_text_file(dir + "/tree_pruned.dot",
                    render_dot(run.pruned_tree, cfg.thresholds, run.test.schema));
    std::string txt;
    for (const auto& r : run.reports)
      if (r.kind == Report::Kind::path) txt += r.summary_text + "\n";
    write_text_file(dir + "/explanations.txt", txt);
    write_text_file(dir + "/report.html", render_html(run.reports));
    save_reports_json(run.reports, dir + "/reports.json");
  };

  const EvalRow row =
      run_stage("eval", [&] { return run_protocol(ds, ecfg, cfg.repetitions, sink); });
  const std::string out = cfg.output_dir + "/eval_results.csv";
  write_text_file(out, eval_row_csv_header() + "\n" + eval_row_csv(row) + "\n");
  std::cout << "dataset " << row.dataset << ": auroc " << row.auroc_mean << " +/- "
            << row.auroc_std << ", mse " << row.mse_mean << ", fractions (path "
            << row.fraction_path << ", combined " << row.fraction_combined
            << "); results written to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"explainable anomaly detection for mixed numerical/categorical data"};
  app.require_subcommand(1);

  std::string config_path;
  CliOverrides ov;
  std::string dataset, schema, out, name, model;
  std::uint64_t seed = 0;
  int workers = 0;
  double lambda = 0.0;

  auto add_common = [&](CLI::App* sub, bool with_model) {
    sub->add_option("--config", config_path, "JSON config file");
    auto* d = sub->add_option("--dataset", dataset, "CSV dataset path");
    auto* s = sub->add_option("--schema", schema, "schema JSON path");
    auto* o = sub->add_option("--out", out, "output directory");
    auto* n = sub->add_option("--name", name, "dataset display name");
    auto* se = sub->add_option("--seed", seed, "master seed");
    auto* w = sub->add_option("--workers", workers, "worker threads (0 = all cores)");
    auto* l = sub->add_option("--lambda", lambda, "pruning lambda");
    CLI::Option* m = with_model ? sub->add_option("--model", model, "model bundle path")
                                : nullptr;
    sub->callback([&, d, s, o, n, se, w, l, m] {
      if (d->count()) ov.dataset = dataset;
      if (s->count()) ov.schema = schema;
      if (o->count()) ov.out = out;
      if (n->count()) ov.name = name;
      if (se->count()) ov.seed = seed;
      if (w->count()) ov.workers = workers;
      if (l->count()) ov.lambda = lambda;
      if (m && m->count()) ov.model = model;
    });
  };

  CLI::App* c_train = app.add_subcommand("train", "fit a model and write the bundle");
  add_common(c_train, true);
  CLI::App* c_score = app.add_subcommand("score", "score a dataset with a trained model");
  add_common(c_score, true);
  CLI::App* c_explain =
      app.add_subcommand("explain", "score, build the surrogate tree and explain anomalies");
  add_common(c_explain, true);
  CLI::App* c_tree = app.add_subcommand("tree", "export full and pruned surrogate trees");
  add_common(c_tree, true);
  CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
  add_common(c_synth, false);
  CLI::App* c_eval = app.add_subcommand("eval", "run the repeated evaluation protocol");
  add_common(c_eval, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const bool config_required = !app.got_subcommand(c_synth);
    RunConfig cfg = resolve_config(config_path, ov, config_required);
    if (app.got_subcommand(c_train)) return cmd_train(cfg, model_path(cfg, ov));
    if (app.got_subcommand(c_score)) return cmd_score(cfg, model_path(cfg, ov));
    if (app.got_subcommand(c_explain)) return cmd_explain(cfg, model_path(cfg, ov));
    if (app.got_subcommand(c_tree)) return cmd_tree(cfg, model_path(cfg, ov));
    if (app.got_subcommand(c_synth)) return cmd_synth(cfg);
    if (app.got_subcommand(c_eval)) return cmd_eval(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string msg = e.what();
    return msg.find("does not exist") != std::string::npos ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitOk;
}
