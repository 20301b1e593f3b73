#include "eadmnc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "eadmnc/errors.hpp"

namespace eadmnc {

using nlohmann::json;

namespace {

struct Checker {
  std::vector<std::string> errors;

  void unknown_keys(const json& j, const std::string& prefix,
                    const std::set<std::string>& known) {
    if (!j.is_object()) {
      errors.push_back(prefix.empty() ? "config root must be an object"
                                      : prefix + ": must be an object");
      return;
    }
    for (const auto& [key, _] : j.items())
      if (!known.count(key))
        errors.push_back((prefix.empty() ? key : prefix + "." + key) + ": unknown key");
  }

  template <typename T>
  void read(const json& j, const std::string& path, const char* key, T* out) {
    if (!j.is_object() || !j.contains(key)) return;
    try {
      *out = j.at(key).get<T>();
    } catch (const json::exception&) {
      errors.push_back(path + ": wrong type");
    }
  }

  void read_nullable(const json& j, const std::string& path, const char* key,
                     double* out) {
    if (!j.is_object() || !j.contains(key)) return;
    if (j.at(key).is_null()) return;  // null keeps the "use model default" NaN
    try {
      *out = j.at(key).get<double>();
    } catch (const json::exception&) {
      errors.push_back(path + ": wrong type");
    }
  }

  void require(bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  }
};

}  // namespace

RunConfig config_from_json(const json& j) {
  Checker c;
  RunConfig cfg;

  c.unknown_keys(j, "",
                 {"dataset", "schema", "output_dir", "name", "seed", "workers",
                  "train_fraction", "repetitions", "lambda", "detector", "thresholds",
                  "tree", "explain", "synth"});
  c.read(j, "dataset", "dataset", &cfg.dataset);
  c.read(j, "schema", "schema", &cfg.schema);
  c.read(j, "output_dir", "output_dir", &cfg.output_dir);
  c.read(j, "name", "name", &cfg.name);
  c.read(j, "seed", "seed", &cfg.seed);
  c.read(j, "workers", "workers", &cfg.workers);
  c.read(j, "train_fraction", "train_fraction", &cfg.train_fraction);
  c.read(j, "repetitions", "repetitions", &cfg.repetitions);
  c.read(j, "lambda", "lambda", &cfg.lambda);

  if (j.is_object() && j.contains("detector")) {
    const json& d = j.at("detector");
    c.unknown_keys(d, "detector",
                   {"gmm_components", "gmm_subset_fraction", "em_max_iter", "em_tol",
                    "target_ratio", "sgd"});
    c.read(d, "detector.gmm_components", "gmm_components", &cfg.detector.gmm_components);
    c.read(d, "detector.gmm_subset_fraction", "gmm_subset_fraction",
           &cfg.detector.gmm_subset_fraction);
    c.read(d, "detector.em_max_iter", "em_max_iter", &cfg.detector.em_max_iter);
    c.read(d, "detector.em_tol", "em_tol", &cfg.detector.em_tol);
    c.read(d, "detector.target_ratio", "target_ratio", &cfg.detector.target_ratio);
    if (d.is_object() && d.contains("sgd")) {
      const json& s = d.at("sgd");
      c.unknown_keys(s, "detector.sgd",
                     {"learning_rate", "batch_size", "epochs", "l2", "seed"});
      c.read(s, "detector.sgd.learning_rate", "learning_rate",
             &cfg.detector.sgd.learning_rate);
      c.read(s, "detector.sgd.batch_size", "batch_size", &cfg.detector.sgd.batch_size);
      c.read(s, "detector.sgd.epochs", "epochs", &cfg.detector.sgd.epochs);
      c.read(s, "detector.sgd.l2", "l2", &cfg.detector.sgd.l2);
      c.read(s, "detector.sgd.seed", "seed", &cfg.detector.sgd.seed);
    }
  }
  if (j.is_object() && j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    c.unknown_keys(t, "thresholds", {"adt", "ndt"});
    c.read(t, "thresholds.adt", "adt", &cfg.thresholds.adt);
    c.read(t, "thresholds.ndt", "ndt", &cfg.thresholds.ndt);
  }
  if (j.is_object() && j.contains("tree")) {
    const json& t = j.at("tree");
    c.unknown_keys(t, "tree", {"l_max", "bins", "min_leaf"});
    c.read(t, "tree.l_max", "l_max", &cfg.tree.l_max);
    c.read(t, "tree.bins", "bins", &cfg.tree.bins);
    c.read(t, "tree.min_leaf", "min_leaf", &cfg.tree.min_leaf);
  }
  if (j.is_object() && j.contains("explain")) {
    const json& e = j.at("explain");
    c.unknown_keys(e, "explain",
                   {"t_filter", "log_pdf_threshold", "tiny_fraction", "top_n"});
    c.read(e, "explain.t_filter", "t_filter", &cfg.explain.t_filter);
    c.read_nullable(e, "explain.log_pdf_threshold", "log_pdf_threshold",
                    &cfg.explain.log_pdf_threshold);
    c.read(e, "explain.tiny_fraction", "tiny_fraction", &cfg.explain.tiny_fraction);
    c.read(e, "explain.top_n", "top_n", &cfg.explain.top_n);
  }
  if (j.is_object() && j.contains("synth")) {
    const json& s = j.at("synth");
    c.unknown_keys(s, "synth", {"n", "d_cont", "d_cat", "nv", "anomaly_ratio"});
    c.read(s, "synth.n", "n", &cfg.synth.n);
    c.read(s, "synth.d_cont", "d_cont", &cfg.synth.d_cont);
    c.read(s, "synth.d_cat", "d_cat", &cfg.synth.d_cat);
    c.read(s, "synth.nv", "nv", &cfg.synth.nv);
    c.read(s, "synth.anomaly_ratio", "anomaly_ratio", &cfg.synth.anomaly_ratio);
  }

  // range checks, phrased with field paths so they can all be listed at once
  c.require(cfg.workers >= 0, "workers: must be >= 0");
  c.require(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0,
            "train_fraction: must lie in (0, 1)");
  c.require(cfg.repetitions >= 1, "repetitions: must be >= 1");
  c.require(cfg.lambda >= 0.0, "lambda: must be >= 0");
  c.require(cfg.detector.gmm_components >= 1, "detector.gmm_components: must be >= 1");
  c.require(cfg.detector.gmm_subset_fraction > 0.0 && cfg.detector.gmm_subset_fraction <= 1.0,
            "detector.gmm_subset_fraction: must lie in (0, 1]");
  c.require(cfg.detector.em_max_iter >= 1, "detector.em_max_iter: must be >= 1");
  c.require(cfg.detector.em_tol >= 0.0, "detector.em_tol: must be >= 0");
  c.require(cfg.detector.target_ratio >= 0.0 && cfg.detector.target_ratio <= 1.0,
            "detector.target_ratio: must lie in [0, 1]");
  c.require(cfg.detector.sgd.learning_rate > 0.0,
            "detector.sgd.learning_rate: must be > 0");
  c.require(cfg.detector.sgd.batch_size >= 1, "detector.sgd.batch_size: must be >= 1");
  c.require(cfg.detector.sgd.epochs >= 1, "detector.sgd.epochs: must be >= 1");
  c.require(cfg.detector.sgd.l2 >= 0.0, "detector.sgd.l2: must be >= 0");
  c.require(cfg.thresholds.adt > 0.0 && cfg.thresholds.adt <= cfg.thresholds.ndt &&
                cfg.thresholds.ndt <= 1.0,
            "thresholds: must satisfy 0 < adt <= ndt <= 1");
  c.require(cfg.tree.l_max >= 1, "tree.l_max: must be >= 1");
  c.require(cfg.tree.bins >= 2, "tree.bins: must be >= 2");
  c.require(cfg.tree.min_leaf >= 1, "tree.min_leaf: must be >= 1");
  c.require(cfg.explain.t_filter > 0.0 && cfg.explain.t_filter < 1.0,
            "explain.t_filter: must lie in (0, 1)");
  c.require(cfg.explain.tiny_fraction > 0.0 && cfg.explain.tiny_fraction < 1.0,
            "explain.tiny_fraction: must lie in (0, 1)");
  c.require(cfg.explain.top_n >= 1, "explain.top_n: must be >= 1");
  c.require(cfg.synth.n >= 1, "synth.n: must be >= 1");
  c.require(cfg.synth.anomaly_ratio >= 0.0 && cfg.synth.anomaly_ratio < 1.0,
            "synth.anomaly_ratio: must lie in [0, 1)");

  if (!c.errors.empty()) {
    std::ostringstream os;
    os << "invalid config (" << c.errors.size() << " problem(s)):";
    for (const auto& e : c.errors) os << "\n  - " << e;
    throw ConfigError(os.str());
  }

  if (cfg.name.empty() && !cfg.dataset.empty()) {
    std::string stem = cfg.dataset;
    if (const auto slash = stem.find_last_of("/\\"); slash != std::string::npos)
      stem = stem.substr(slash + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos)
      stem = stem.substr(0, dot);
    cfg.name = stem;
  }
  // one master seed feeds both stages unless sgd.seed is set explicitly
  if (!j.is_object() || !j.contains("detector") || !j.at("detector").is_object() ||
      !j.at("detector").contains("sgd") || !j.at("detector").at("sgd").contains("seed"))
    cfg.detector.sgd.seed = cfg.seed;
  cfg.detector.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file \"" + path + "\": " + e.what());
  }
  return config_from_json(j);
}

json effective_config_json(const RunConfig& cfg) {
  json j;
  j["dataset"] = cfg.dataset;
  j["schema"] = cfg.schema;
  j["output_dir"] = cfg.output_dir;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["train_fraction"] = cfg.train_fraction;
  j["repetitions"] = cfg.repetitions;
  j["lambda"] = cfg.lambda;
  j["detector"] = {{"gmm_components", cfg.detector.gmm_components},
                   {"gmm_subset_fraction", cfg.detector.gmm_subset_fraction},
                   {"em_max_iter", cfg.detector.em_max_iter},
                   {"em_tol", cfg.detector.em_tol},
                   {"target_ratio", cfg.detector.target_ratio},
                   {"sgd",
                    {{"learning_rate", cfg.detector.sgd.learning_rate},
                     {"batch_size", cfg.detector.sgd.batch_size},
                     {"epochs", cfg.detector.sgd.epochs},
                     {"l2", cfg.detector.sgd.l2},
                     {"seed", cfg.detector.sgd.seed}}}};
  j["thresholds"] = {{"adt", cfg.thresholds.adt}, {"ndt", cfg.thresholds.ndt}};
  j["tree"] = {{"l_max", cfg.tree.l_max},
               {"bins", cfg.tree.bins},
               {"min_leaf", cfg.tree.min_leaf}};
  j["explain"] = {{"t_filter", cfg.explain.t_filter},
                  {"tiny_fraction", cfg.explain.tiny_fraction},
                  {"top_n", cfg.explain.top_n}};
  if (std::isnan(cfg.explain.log_pdf_threshold))
    j["explain"]["log_pdf_threshold"] = nullptr;
  else
    j["explain"]["log_pdf_threshold"] = cfg.explain.log_pdf_threshold;
  j["synth"] = {{"n", cfg.synth.n},
                {"d_cont", cfg.synth.d_cont},
                {"d_cat", cfg.synth.d_cat},
                {"nv", cfg.synth.nv},
                {"anomaly_ratio", cfg.synth.anomaly_ratio}};
  return j;
}

}  // namespace eadmnc
