#include "eadmnc/model_io.hpp"

#include <cmath>
#include <fstream>

#include "eadmnc/errors.hpp"

namespace eadmnc {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError("\"" + path + "\": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write \"" + path + "\"");
  out << j.dump(2) << "\n";
}

json node_to_json(const TreeNode& node) {
  json j;
  j["count"] = node.count;
  j["mean"] = node.mean;
  j["variance"] = node.variance;
  j["num_vars"] = node.num_vars;
  if (!node.is_leaf()) {
    const auto& c = *node.split;
    j["split"] = {{"feature", c.feature},
                  {"categorical", c.categorical},
                  {"threshold", c.threshold},
                  {"left_levels", c.left_levels}};
    j["left"] = node_to_json(*node.left);
    j["right"] = node_to_json(*node.right);
  }
  return j;
}

std::unique_ptr<TreeNode> node_from_json(const json& j) {
  auto node = std::make_unique<TreeNode>();
  node->count = j.at("count").get<std::size_t>();
  node->mean = j.at("mean").get<double>();
  node->variance = j.at("variance").get<double>();
  node->num_vars = j.at("num_vars").get<std::size_t>();
  if (j.contains("split")) {
    const auto& s = j.at("split");
    SplitCondition c;
    c.feature = s.at("feature").get<std::size_t>();
    c.categorical = s.at("categorical").get<bool>();
    c.threshold = s.at("threshold").get<double>();
    c.left_levels = s.at("left_levels").get<std::vector<std::int32_t>>();
    node->split = std::move(c);
    node->left = node_from_json(j.at("left"));
    node->right = node_from_json(j.at("right"));
  }
  return node;
}

}  // namespace

json schema_to_json(const Schema& schema) {
  json j;
  j["continuous"] = schema.continuous;
  j["categoricals"] = json::array();
  for (const auto& c : schema.categoricals)
    j["categoricals"].push_back({{"name", c.name}, {"levels", c.levels}});
  j["label_column"] = schema.label_column;
  j["anomalous_values"] = schema.anomalous_values;
  return j;
}

Schema schema_from_json(const json& j) {
  Schema s;
  try {
    s.continuous = j.at("continuous").get<std::vector<std::string>>();
    for (const auto& c : j.at("categoricals")) {
      CategoricalFeature f;
      f.name = c.at("name").get<std::string>();
      f.levels = c.at("levels").get<std::vector<std::string>>();
      s.categoricals.push_back(std::move(f));
    }
    s.label_column = j.value("label_column", std::string());
    s.anomalous_values = j.value("anomalous_values", std::vector<std::string>());
  } catch (const json::exception& e) {
    throw LoadError(std::string("schema: ") + e.what());
  }
  return s;
}

json tree_to_json(const SurrogateTree& tree) {
  if (!tree.root) throw ValidationError("tree_to_json: empty tree");
  json j;
  j["total_count"] = tree.total_count;
  j["thresholds"] = {{"adt", tree.thresholds.adt}, {"ndt", tree.thresholds.ndt}};
  j["config"] = {{"l_max", tree.config.l_max},
                 {"bins", tree.config.bins},
                 {"min_leaf", tree.config.min_leaf}};
  j["root"] = node_to_json(*tree.root);
  return j;
}

SurrogateTree tree_from_json(const json& j) {
  SurrogateTree t;
  try {
    t.total_count = j.at("total_count").get<std::size_t>();
    t.thresholds.adt = j.at("thresholds").at("adt").get<double>();
    t.thresholds.ndt = j.at("thresholds").at("ndt").get<double>();
    t.config.l_max = j.at("config").at("l_max").get<std::size_t>();
    t.config.bins = j.at("config").at("bins").get<std::size_t>();
    t.config.min_leaf = j.at("config").at("min_leaf").get<std::size_t>();
    t.root = node_from_json(j.at("root"));
  } catch (const json::exception& e) {
    throw LoadError(std::string("tree: ") + e.what());
  }
  t.thresholds.validate();
  t.config.validate();
  return t;
}

json report_to_json(const Report& r) {
  json j;
  j["anomaly_index"] = r.anomaly_index;
  j["detection_number"] = r.detection_number;
  j["kind"] = r.kind == Report::Kind::path ? "path" : "combined";
  j["score"] = {{"log_continuous", r.score.log_continuous},
                {"log_categorical", r.score.log_categorical},
                {"total", r.score.total}};
  j["predicted_component"] = r.predicted_component;
  j["component_log_pdfs"] = r.component_log_pdfs;
  j["avg_estimator"] = r.avg_estimator;
  if (r.path) {
    json conds = json::array();
    for (const auto& c : r.path->conditions) {
      const char* op = c.op == Comparator::le         ? "<="
                       : c.op == Comparator::gt       ? ">"
                       : c.op == Comparator::in_set   ? "in"
                                                      : "not_in";
      conds.push_back(
          {{"feature", c.feature}, {"op", op}, {"value", c.value}, {"levels", c.levels}});
    }
    j["path"] = {{"conditions", conds},
                 {"leaf_share", r.path->leaf_share},
                 {"leaf_mean", r.path->leaf_mean}};
  }
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    json vj;
    vj["rule"] =
        v.rule == RuleId::all_gaussians_unlikely ? "all_gaussians_unlikely" : "tiny_component";
    vj["fired"] = v.fired;
    vj["threshold_used"] = v.threshold_used;
    if (v.fired) {
      if (v.rule == RuleId::all_gaussians_unlikely)
        vj["component_log_pdfs"] = v.component_log_pdfs;
      else {
        vj["assigned_component"] = v.assigned_component;
        vj["component_share"] = v.component_share;
      }
    }
    verdicts.push_back(std::move(vj));
  }
  j["verdicts"] = verdicts;
  json findings = json::array();
  for (const auto& f : r.findings) {
    json fj;
    fj["j"] = f.j;
    fj["feature"] = f.feature;
    fj["coord_level"] = f.coord_level;
    fj["record_value"] = f.record_value;
    fj["y_bit"] = f.y_bit;
    fj["estimator"] = f.estimator;
    if (f.involved_continuous)
      fj["involved_continuous"] = {{"feature", f.involved_continuous->first},
                                   {"value", f.involved_continuous->second}};
    findings.push_back(std::move(fj));
  }
  j["findings"] = findings;
  j["summary_text"] = r.summary_text;
  return j;
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  const AdmncModel& m = bundle.model;
  json j;
  j["format_version"] = 1;
  j["schema"] = schema_to_json(m.schema);
  json stats = json::array();
  for (const auto& s : m.standardization_stats)
    stats.push_back({{"mean", s.mean}, {"stddev", s.stddev}});
  j["standardization_stats"] = stats;
  j["gmm"] = {{"weights", m.gmm.weights},
              {"means", m.gmm.means},
              {"covariances", m.gmm.covariances}};
  j["categorical"] = {{"w", m.categorical.w},
                      {"continuous_dim", m.categorical.continuous_dim},
                      {"block_offsets", m.categorical.block_offsets},
                      {"cardinalities", m.categorical.cardinalities}};
  j["anomaly_threshold"] = m.anomaly_threshold;
  j["rule1_log_pdf_default"] = m.rule1_log_pdf_default;
  j["thresholds"] = {{"adt", bundle.thresholds.adt}, {"ndt", bundle.thresholds.ndt}};
  j["config"] = bundle.config;
  j["seed"] = bundle.seed;
  write_json_file(j, path);
}

ModelBundle load_model(const std::string& path) {
  const json j = read_json_file(path);
  ModelBundle b;
  try {
    AdmncModel& m = b.model;
    m.schema = schema_from_json(j.at("schema"));
    for (const auto& s : j.at("standardization_stats"))
      m.standardization_stats.push_back(
          {s.at("mean").get<double>(), s.at("stddev").get<double>()});
    m.gmm.weights = j.at("gmm").at("weights").get<std::vector<double>>();
    m.gmm.means = j.at("gmm").at("means").get<std::vector<std::vector<double>>>();
    m.gmm.covariances =
        j.at("gmm").at("covariances").get<std::vector<std::vector<std::vector<double>>>>();
    m.categorical.w = j.at("categorical").at("w").get<std::vector<double>>();
    m.categorical.continuous_dim = j.at("categorical").at("continuous_dim").get<std::size_t>();
    m.categorical.block_offsets =
        j.at("categorical").at("block_offsets").get<std::vector<std::size_t>>();
    m.categorical.cardinalities =
        j.at("categorical").at("cardinalities").get<std::vector<std::size_t>>();
    m.anomaly_threshold = j.at("anomaly_threshold").get<double>();
    m.rule1_log_pdf_default = j.at("rule1_log_pdf_default").get<double>();
    b.thresholds.adt = j.at("thresholds").at("adt").get<double>();
    b.thresholds.ndt = j.at("thresholds").at("ndt").get<double>();
    b.config = j.value("config", json::object());
    b.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw LoadError("\"" + path + "\": " + e.what());
  }
  b.model.schema.validate();
  b.model.gmm.validate();
  b.model.categorical.validate();
  b.thresholds.validate();
  if (b.model.standardization_stats.size() != b.model.schema.continuous_dim())
    throw LoadError("\"" + path + "\": standardization stats do not match the schema");
  if (b.model.categorical.continuous_dim != b.model.schema.continuous_dim() ||
      b.model.categorical.one_hot_width() != b.model.schema.one_hot_width())
    throw LoadError("\"" + path + "\": categorical layout does not match the schema");
  return b;
}

void save_tree(const SurrogateTree& tree, const std::string& path) {
  write_json_file(tree_to_json(tree), path);
}

SurrogateTree load_tree(const std::string& path) {
  return tree_from_json(read_json_file(path));
}

void save_scores_csv(const std::vector<AnomalyScore>& scores,
                     const std::vector<EstimatorTarget>& targets, double threshold,
                     const std::string& path) {
  if (!targets.empty() && targets.size() != scores.size())
    throw ValidationError("save_scores_csv: targets do not align with scores");
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write \"" + path + "\"");
  out << "index,log_continuous,log_categorical,total,estimator,flagged\n";
  char buf[256];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    if (targets.empty())
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,,%d", i, s.log_continuous,
                    s.log_categorical, s.total, s.total < threshold ? 1 : 0);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%d", i,
                    s.log_continuous, s.log_categorical, s.total, targets[i].estimator,
                    s.total < threshold ? 1 : 0);
    out << buf << "\n";
  }
}

void save_reports_json(const std::vector<Report>& reports, const std::string& path) {
  json j = json::array();
  for (const auto& r : reports) j.push_back(report_to_json(r));
  write_json_file(j, path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write \"" + path + "\"");
  out << content;
}

}  // namespace eadmnc
