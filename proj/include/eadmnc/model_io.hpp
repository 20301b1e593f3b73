#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "eadmnc/detector.hpp"
#include "eadmnc/explain.hpp"
#include "eadmnc/tree.hpp"

namespace eadmnc {

// Model bundle: schema, standardization stats, mixture, logistic weights with
// their layout, thresholds, and a config echo for reproducibility.
struct ModelBundle {
  AdmncModel model;
  Thresholds thresholds;
  nlohmann::json config;  // effective config at train time
  std::uint64_t seed = 0;
};

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);
nlohmann::json tree_to_json(const SurrogateTree& tree);
SurrogateTree tree_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const Report& report);

void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

void save_tree(const SurrogateTree& tree, const std::string& path);
SurrogateTree load_tree(const std::string& path);

// index,log_continuous,log_categorical,total,estimator,flagged
void save_scores_csv(const std::vector<AnomalyScore>& scores,
                     const std::vector<EstimatorTarget>& targets, double threshold,
                     const std::string& path);

void save_reports_json(const std::vector<Report>& reports, const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace eadmnc
