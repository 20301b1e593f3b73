#include "eadmnc/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "eadmnc/errors.hpp"

namespace eadmnc {

namespace {

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// thresholds print like "940.0" and "13729.499"
std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos &&
      s.find_first_not_of("-0123456789") == std::string::npos)
    s += ".0";
  return s;
}

std::string fmt_share_pct(double share) { return fmt3(share * 100.0); }

std::string quote_dot(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

const char* class_name(RangeClass c) {
  switch (c) {
    case RangeClass::anomalous: return "anomalous";
    case RangeClass::transition: return "transition";
    default: return "normal";
  }
}

}  // namespace

void ExplainConfig::validate() const {
  if (!(t_filter > 0.0 && t_filter < 1.0))
    throw ValidationError("explain: t_filter must lie in (0, 1)");
  if (!(tiny_fraction > 0.0 && tiny_fraction < 1.0))
    throw ValidationError("explain: tiny_fraction must lie in (0, 1)");
  if (top_n == 0) throw ValidationError("explain: top_n must be positive");
}

double ExplainConfig::resolve_log_pdf_threshold(const AdmncModel& model) const {
  return std::isnan(log_pdf_threshold) ? model.rule1_log_pdf_default : log_pdf_threshold;
}

PathExplanation transcribe(const SurrogateTree& tree, const Schema& schema,
                           const std::vector<FeatureStats>& stats, const MixedRecord& r) {
  if (!tree.root) throw ValidationError("transcribe: empty tree");
  const std::size_t d_cont = schema.continuous_dim();
  PathExplanation out;
  const TreeNode* node = tree.root.get();
  while (!node->is_leaf()) {
    const auto& c = *node->split;
    PathCondition pc;
    bool left;
    if (!c.categorical) {
      left = r.x.at(c.feature) <= c.threshold;
      pc.feature = schema.continuous.at(c.feature);
      pc.op = left ? Comparator::le : Comparator::gt;
      pc.value = stats.empty() ? c.threshold : destandardize(stats.at(c.feature), c.threshold);
    } else {
      const std::size_t f = c.feature - d_cont;
      const auto lvl = r.levels.at(f);
      left = lvl != kUnknownLevel &&
             std::binary_search(c.left_levels.begin(), c.left_levels.end(), lvl);
      pc.feature = schema.categoricals.at(f).name;
      pc.op = left ? Comparator::in_set : Comparator::not_in_set;
      for (auto l : c.left_levels)
        pc.levels.push_back(schema.categoricals.at(f).levels.at(static_cast<std::size_t>(l)));
    }
    out.conditions.push_back(std::move(pc));
    node = left ? node->left.get() : node->right.get();
  }
  out.leaf_share = static_cast<double>(node->count) / static_cast<double>(tree.total_count);
  out.leaf_mean = node->mean;
  out.leaf_class = classify_leaf(*node, tree.thresholds);
  return out;
}

std::vector<RuleVerdict> continuous_rules(const AdmncModel& model,
                                          std::span<const double> x,
                                          const ExplainConfig& cfg) {
  cfg.validate();
  GmmDensity density(model.gmm);
  const std::vector<double> lps = density.component_log_pdfs(x);
  const double cut = cfg.resolve_log_pdf_threshold(model);

  RuleVerdict rule1;
  rule1.rule = RuleId::all_gaussians_unlikely;
  rule1.threshold_used = cut;
  rule1.fired = std::all_of(lps.begin(), lps.end(), [&](double v) { return v < cut; });
  if (rule1.fired) rule1.component_log_pdfs = lps;

  RuleVerdict rule2;
  rule2.rule = RuleId::tiny_component;
  rule2.threshold_used = cfg.tiny_fraction;
  const std::size_t c = density.assign(x);
  const double share = model.gmm.weights[c];
  rule2.fired = share < cfg.tiny_fraction;
  if (rule2.fired) {
    rule2.assigned_component = c;
    rule2.component_share = share;
  }
  return {rule1, rule2};
}

std::vector<CategoricalFinding> categorical_findings(const AdmncModel& model,
                                                     std::span<const double> x,
                                                     const OneHotView& y,
                                                     const ExplainConfig& cfg) {
  cfg.validate();
  const CategoricalModel& cm = model.categorical;
  if (y.y.size() != cm.one_hot_width())
    throw ValidationError("categorical_findings: one-hot width mismatch");
  const double base = cm.base(x);
  const std::size_t width = cm.one_hot_width();

  std::vector<std::pair<double, std::size_t>> E;  // (estimator, j), Eq.-style list
  E.reserve(width);
  for (std::size_t j = 0; j < width; ++j) {
    const double s = y.y[j] ? 1.0 : -1.0;
    E.emplace_back(sigmoid(s * (base + cm.coord_weight(j))), j);
  }
  std::sort(E.begin(), E.end());

  const std::vector<std::int32_t> record_levels = one_hot_decode(y, model.schema);
  std::vector<CategoricalFinding> out;
  for (const auto& [est, j] : E) {
    if (est >= cfg.t_filter) break;
    CategoricalFinding f;
    f.j = j;
    f.estimator = est;
    f.y_bit = y.y[j] != 0;
    const auto [feat, lvl] = model.schema.block_of(j);
    f.feature = model.schema.categoricals[feat].name;
    f.coord_level = model.schema.categoricals[feat].levels[lvl];
    f.record_value = record_levels[feat] == kUnknownLevel
                         ? "unknown"
                         : model.schema.categoricals[feat]
                               .levels[static_cast<std::size_t>(record_levels[feat])];

    // addends of <w,(x,m_j)>: continuous terms, the bias, and the mask term;
    // the most harmful one is the smallest signed contribution, earliest
    // coordinate on ties
    const double s = f.y_bit ? 1.0 : -1.0;
    double worst = std::numeric_limits<double>::infinity();
    std::size_t worst_i = cm.continuous_dim;
    for (std::size_t i = 0; i < cm.continuous_dim; ++i) {
      const double contrib = s * cm.w[i] * x[i];
      if (contrib < worst) {
        worst = contrib;
        worst_i = i;
      }
    }
    const double bias_contrib = s * cm.w[cm.continuous_dim];
    if (bias_contrib < worst) {
      worst = bias_contrib;
      worst_i = cm.continuous_dim;
    }
    const double mask_contrib = s * cm.coord_weight(j);
    if (mask_contrib < worst) worst_i = cm.continuous_dim + 1;
    if (worst_i < cm.continuous_dim)
      f.involved_continuous = {model.schema.continuous[worst_i],
                               destandardize(model.standardization_stats[worst_i],
                                             x[worst_i])};
    out.push_back(std::move(f));
  }
  return out;
}

std::string render_condition(const PathCondition& c) {
  std::ostringstream os;
  os << "Feature \"" << c.feature << "\"";
  switch (c.op) {
    case Comparator::le: os << " <= " << fmt_value(c.value); break;
    case Comparator::gt: os << " > " << fmt_value(c.value); break;
    case Comparator::in_set:
    case Comparator::not_in_set: {
      os << (c.op == Comparator::in_set ? " in {" : " not in {");
      for (std::size_t i = 0; i < c.levels.size(); ++i)
        os << (i ? ", " : "") << c.levels[i];
      os << "}";
      break;
    }
  }
  return os.str();
}

std::string render_text(const Report& report) {
  std::ostringstream os;
  if (report.kind == Report::Kind::path) {
    os << "Positive anomaly detection N(" << report.detection_number << ").\n";
    os << "* Explanation: \n";
    for (const auto& c : report.path->conditions)
      os << "--> " << render_condition(c) << "\n";
    os << "* These features place the item in a cluster containing "
       << fmt_share_pct(report.path->leaf_share) << "% of the data.\n";
    return os.str();
  }
  os << "Detected anomaly N(" << report.detection_number << "):\n";
  os << "* Explanation: \n";
  bool any = false;
  for (const auto& v : report.verdicts) {
    if (!v.fired) continue;
    any = true;
    if (v.rule == RuleId::all_gaussians_unlikely)
      os << "-> (1) It is an anomaly since the continuous sample is clearly separated "
            "from learned groups.\n";
    else
      os << "-> (1) It is an anomaly since the continuous sample is assigned to a group "
            "that represents a tiny fraction of samples.\n";
  }
  for (const auto& f : report.findings) {
    any = true;
    os << "-> (2) The model considers improbable that a normal sample could have in the "
          "categorical feature \""
       << f.feature << "\" a value of " << f.record_value;
    if (f.involved_continuous) {
      os << " knowing the continuous value of " << fmt3(f.involved_continuous->second)
         << " in the feature \"" << f.involved_continuous->first << "\".";
    }
    os << "\n";
  }
  if (!any)
    os << "-> No individual factor passed the explanation thresholds; the detection "
          "stems from the combined likelihood.\n";
  return os.str();
}

namespace {

// Appendix-style detail block for a combined report.
std::string detailed_text(const Report& r) {
  std::ostringstream os;
  os << "Detected anomaly N(" << r.detection_number << "):\n";
  os << "** Continuous vector details (1):\n";
  os << "-> Predicted Gaussian (class): " << r.predicted_component << "\n";
  os << "-> Continuous anomalous estimator: " << fmt3(r.score.log_continuous) << "\n";
  os << "-> Rule-based explanation (1):\n";
  bool fired_any = false;
  for (const auto& v : r.verdicts) {
    if (!v.fired) continue;
    fired_any = true;
    if (v.rule == RuleId::all_gaussians_unlikely)
      os << "--> First rule is fired -- It is an anomaly since continuous sample is "
            "clearly separated from learned groups.\n";
    else
      os << "--> Second rule is fired -- It is an anomaly since continuous sample is "
            "assigned to a Gaussian that represents a tiny fraction of samples.\n";
  }
  if (!fired_any) os << "--> No rule is fired.\n";
  const std::size_t k = r.component_log_pdfs.size();
  os << "--> Continuous pattern information: probability of belonging to each of the "
        "Gaussians (classes from 0 to "
     << (k == 0 ? 0 : k - 1) << "):\n";
  for (std::size_t c = 0; c < k; ++c)
    os << "--> pdf(class=" << c << ") = " << fmt3(r.component_log_pdfs[c]) << "\n";
  os << "** Categorical vector details (2):\n";
  os << "-> Logistic estimator: " << fmt3(r.score.log_categorical) << "\n";
  os << "-> Average categorical estimator: " << fmt3(r.avg_estimator) << "\n";
  os << "-> Number of categorical estimators detected below anomalous threshold: "
     << r.findings.size() << "\n";
  const std::size_t n = r.findings.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = r.findings[i];
    const std::string tag = "[" + std::to_string(i + 1) + "/" + std::to_string(n) + "] ";
    os << "--> " << tag << "It is an anomaly since categorical feature \"" << f.feature
       << "\" has a value of " << f.record_value << "\n";
    os << "--> " << tag << "Categorical estimator value: " << fmt3(f.estimator) << "\n";
    if (f.involved_continuous)
      os << "--> " << tag << "Involved continuous feature \"" << f.involved_continuous->first
         << "\" with value " << fmt3(f.involved_continuous->second) << ".\n";
  }
  return os.str();
}

}  // namespace

Report explain(const AdmncModel& model, const SurrogateTree& tree, const Dataset& ds,
               std::size_t record_index, std::size_t detection_number,
               const ExplainConfig& cfg) {
  cfg.validate();
  if (record_index >= ds.size())
    throw ValidationError("explain: record index out of range");
  const MixedRecord& r = ds.records[record_index];
  const AnomalyScore sc = score(model, r);
  if (!(sc.total < model.anomaly_threshold))
    throw ValidationError("explain: record " + std::to_string(record_index) +
                          " is not flagged as anomalous");

  Report rep;
  rep.anomaly_index = record_index;
  rep.detection_number = detection_number;
  rep.score = sc;

  const std::vector<double> x = standardize_record(model, r);
  GmmDensity density(model.gmm);
  rep.component_log_pdfs = density.component_log_pdfs(x);
  rep.predicted_component = density.assign(x);

  const OneHotView y = one_hot(r, model.schema);
  const CategoricalModel& cm = model.categorical;
  const double base = cm.base(x);
  double est_sum = 0.0;
  for (std::size_t j = 0; j < y.y.size(); ++j) {
    const double s = y.y[j] ? 1.0 : -1.0;
    est_sum += sigmoid(s * (base + cm.coord_weight(j)));
  }
  rep.avg_estimator = y.y.empty() ? 0.0 : est_sum / static_cast<double>(y.y.size());

  const TreeNode& leaf = predict(tree, r);
  if (classify_leaf(leaf, tree.thresholds) == RangeClass::anomalous) {
    rep.kind = Report::Kind::path;
    rep.path = transcribe(tree, ds.schema, ds.standardization_stats, r);
  } else {
    rep.kind = Report::Kind::combined;
    rep.verdicts = continuous_rules(model, x, cfg);
    rep.findings = categorical_findings(model, x, y, cfg);
  }
  rep.summary_text = render_text(rep);
  return rep;
}

std::vector<Report> explain_all(const AdmncModel& model, const SurrogateTree& tree,
                                const Dataset& ds,
                                const std::vector<std::pair<std::size_t, AnomalyScore>>& tops,
                                const ExplainConfig& cfg) {
  std::vector<Report> out;
  out.reserve(tops.size());
  for (std::size_t i = 0; i < tops.size(); ++i)
    out.push_back(explain(model, tree, ds, tops[i].first, i + 1, cfg));
  return out;
}

namespace {

struct DotWriter {
  std::ostringstream os;
  const Schema& schema;
  const Thresholds& th;
  std::size_t total;
  std::size_t next_id = 0;

  std::string split_label(const SplitCondition& c) const {
    std::ostringstream s;
    if (!c.categorical) {
      s << schema.continuous.at(c.feature) << " <= " << fmt_value(c.threshold);
    } else {
      const auto& feat = schema.categoricals.at(c.feature - schema.continuous_dim());
      s << feat.name << " in {";
      for (std::size_t i = 0; i < c.left_levels.size(); ++i)
        s << (i ? ", " : "") << feat.levels.at(static_cast<std::size_t>(c.left_levels[i]));
      s << "}";
    }
    return s.str();
  }

  const char* band_color(double mean) const {
    if (mean < th.adt) return "#e06666";
    if (mean >= th.ndt) return "#93c47d";
    return "#ffd966";
  }

  // overlay == nullptr means the node was pruned away in the overlay tree
  std::size_t emit(const TreeNode& node, const TreeNode* overlay, bool have_overlay) {
    const std::size_t id = next_id++;
    const bool shadowed = have_overlay && overlay == nullptr;
    std::ostringstream label;
    if (node.is_leaf())
      label << class_name(classify_leaf(node, th)) << "\\n";
    else
      label << quote_dot(split_label(*node.split)) << "\\n";
    label << "n=" << node.count << " ("
          << fmt_share_pct(static_cast<double>(node.count) / static_cast<double>(total))
          << "%)\\nest=" << fmt3(node.mean);
    os << "  n" << id << " [label=\"" << label.str() << "\", fillcolor=\""
       << (shadowed ? "#cccccc" : band_color(node.mean)) << "\""
       << (shadowed ? ", style=\"filled,dashed\"" : "") << "];\n";
    if (!node.is_leaf()) {
      const bool overlay_has_children =
          overlay != nullptr && !overlay->is_leaf();
      const std::size_t lid =
          emit(*node.left, overlay_has_children ? overlay->left.get() : nullptr,
               have_overlay);
      const std::size_t rid =
          emit(*node.right, overlay_has_children ? overlay->right.get() : nullptr,
               have_overlay);
      os << "  n" << id << " -> n" << lid << " [label=\"yes\"];\n";
      os << "  n" << id << " -> n" << rid << " [label=\"no\"];\n";
    }
    return id;
  }
};

}  // namespace

std::string render_dot(const SurrogateTree& tree, const Thresholds& th,
                       const Schema& schema, const SurrogateTree* pruned_overlay) {
  if (!tree.root) throw ValidationError("render_dot: empty tree");
  th.validate();
  DotWriter w{{}, schema, th, tree.total_count};
  w.os << "digraph surrogate_tree {\n";
  w.os << "  graph [rankdir=TB];\n";
  w.os << "  node [shape=box, style=filled, fontname=\"Helvetica\"];\n";
  w.emit(*tree.root, pruned_overlay ? pruned_overlay->root.get() : nullptr,
         pruned_overlay != nullptr);
  w.os << "}\n";
  return w.os.str();
}

std::string render_html(const std::vector<Report>& reports) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
     << "<title>Anomaly explanation report</title>\n"
     << "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto;}"
     << "pre{background:#f6f6f6;padding:1em;overflow-x:auto;}</style>\n"
     << "</head>\n<body>\n<h1>Anomaly explanation report</h1>\n"
     << "<p>" << reports.size() << " explained detection(s).</p>\n";
  for (const auto& r : reports) {
    os << "<section>\n<h2>"
       << (r.kind == Report::Kind::path ? "Positive anomaly detection N("
                                        : "Detected anomaly N(")
       << r.detection_number << ")" << (r.kind == Report::Kind::path ? "." : ":")
       << "</h2>\n<pre>";
    os << html_escape(r.kind == Report::Kind::path ? r.summary_text : detailed_text(r));
    os << "</pre>\n</section>\n";
  }
  os << "</body>\n</html>\n";
  return os.str();
}

}  // namespace eadmnc
