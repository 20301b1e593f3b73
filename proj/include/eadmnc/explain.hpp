#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eadmnc/detector.hpp"
#include "eadmnc/tree.hpp"

namespace eadmnc {

struct ExplainConfig {
  double t_filter = 0.40;  // categorical estimators below this become findings
  // Cut for the "every component finds x unlikely" rule, in log-space. NaN
  // means "use the model's calibrated default".
  double log_pdf_threshold = std::numeric_limits<double>::quiet_NaN();
  double tiny_fraction = 0.01;  // component weight below this fires rule 2
  std::size_t top_n = 400;
  void validate() const;
  double resolve_log_pdf_threshold(const AdmncModel& model) const;
};

enum class Comparator { le, gt, in_set, not_in_set };

struct PathCondition {
  std::string feature;
  Comparator op = Comparator::le;
  double value = 0.0;               // continuous comparators, original units
  std::vector<std::string> levels;  // set comparators
};

struct PathExplanation {
  std::vector<PathCondition> conditions;  // root-to-leaf order
  double leaf_share = 0.0;                // leaf.count / |D|
  double leaf_mean = 0.0;
  RangeClass leaf_class = RangeClass::anomalous;
};

enum class RuleId { all_gaussians_unlikely, tiny_component };

struct RuleVerdict {
  RuleId rule = RuleId::all_gaussians_unlikely;
  bool fired = false;
  // evidence, present only when fired
  std::vector<double> component_log_pdfs;  // rule 1
  std::size_t assigned_component = 0;      // rule 2
  double component_share = 0.0;            // rule 2
  double threshold_used = 0.0;
};

struct CategoricalFinding {
  std::size_t j = 0;         // one-hot coordinate
  std::string feature;       // feature owning the coordinate
  std::string coord_level;   // level the coordinate encodes
  std::string record_value;  // the record's actual level for that feature
  bool y_bit = false;
  double estimator = 0.0;
  std::optional<std::pair<std::string, double>> involved_continuous;  // original units
};

struct Report {
  std::size_t anomaly_index = 0;      // record position in the scored dataset
  std::size_t detection_number = 0;   // 1-based rank among the top anomalies
  enum class Kind { path, combined } kind = Kind::path;
  std::optional<PathExplanation> path;
  std::vector<RuleVerdict> verdicts;
  std::vector<CategoricalFinding> findings;
  AnomalyScore score{};
  std::size_t predicted_component = 0;
  std::vector<double> component_log_pdfs;
  double avg_estimator = 0.0;  // mean term estimator over every coordinate
  std::string summary_text;
};

// Root-to-leaf conditions for the leaf the record lands in, in original
// units. stats are the standardization stats of the dataset the tree was
// built on (empty when it was built on raw data).
PathExplanation transcribe(const SurrogateTree& tree, const Schema& schema,
                           const std::vector<FeatureStats>& stats, const MixedRecord& r);

std::vector<RuleVerdict> continuous_rules(const AdmncModel& model,
                                          std::span<const double> x,
                                          const ExplainConfig& cfg);

std::vector<CategoricalFinding> categorical_findings(const AdmncModel& model,
                                                     std::span<const double> x,
                                                     const OneHotView& y,
                                                     const ExplainConfig& cfg);

// Dispatches on the leaf class of the (pruned) tree: anomalous leaf gives a
// path report, anything else the combined rule + findings report. Refuses
// records that are not flagged by the model.
Report explain(const AdmncModel& model, const SurrogateTree& tree, const Dataset& ds,
               std::size_t record_index, std::size_t detection_number,
               const ExplainConfig& cfg);

std::vector<Report> explain_all(const AdmncModel& model, const SurrogateTree& tree,
                                const Dataset& ds,
                                const std::vector<std::pair<std::size_t, AnomalyScore>>& tops,
                                const ExplainConfig& cfg);

std::string render_condition(const PathCondition& c);
std::string render_text(const Report& report);

// Graphviz export; leaves carry the range-class band colors. When
// pruned_overlay is given, subtrees absent from it are drawn shadowed.
std::string render_dot(const SurrogateTree& tree, const Thresholds& th,
                       const Schema& schema, const SurrogateTree* pruned_overlay = nullptr);

std::string render_html(const std::vector<Report>& reports);

}  // namespace eadmnc
