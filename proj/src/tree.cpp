#include "eadmnc/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eadmnc/errors.hpp"
#include "eadmnc/parallel.hpp"

namespace eadmnc {

namespace {

constexpr double kSplitGainEps = 1e-12;

struct MomentAcc {
  double n = 0.0, sum = 0.0, sumsq = 0.0;
  void add(double v) {
    n += 1.0;
    sum += v;
    sumsq += v * v;
  }
  void merge(const MomentAcc& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
  }
  // sum of squared deviations from the mean
  double ss() const { return n > 0.0 ? sumsq - sum * sum / n : 0.0; }
};

struct FeatureBest {
  bool found = false;
  double children_ss = std::numeric_limits<double>::infinity();
  SplitCondition cond;
};

struct Builder {
  const Dataset& ds;
  const std::vector<EstimatorTarget>& targets;
  const TreeConfig& cfg;
  std::size_t d_cont, d_cat;
  std::vector<std::vector<double>> candidates;  // per continuous feature, sorted
  std::vector<std::uint32_t> rows;

  Builder(const Dataset& ds_, const std::vector<EstimatorTarget>& targets_,
          const TreeConfig& cfg_)
      : ds(ds_), targets(targets_), cfg(cfg_) {
    d_cont = ds.schema.continuous_dim();
    d_cat = ds.schema.categorical_count();
    rows.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
    build_candidates();
  }

  void build_candidates() {
    candidates.resize(d_cont);
    const std::size_t n = ds.size();
    std::vector<double> col(n);
    for (std::size_t f = 0; f < d_cont; ++f) {
      for (std::size_t i = 0; i < n; ++i) col[i] = ds.records[i].x[f];
      std::sort(col.begin(), col.end());
      auto& cand = candidates[f];
      for (std::size_t j = 1; j < cfg.bins; ++j) {
        const double t = col[j * n / cfg.bins];
        if (t >= col.back()) continue;  // would leave the right side empty
        if (cand.empty() || t > cand.back()) cand.push_back(t);
      }
    }
  }

  FeatureBest best_continuous(std::size_t f, std::uint32_t* begin, std::uint32_t* end,
                              const MomentAcc& node) const {
    FeatureBest best;
    const auto& cand = candidates[f];
    if (cand.empty()) return best;
    // interval i holds rows with cand[i-1] < x <= cand[i]; prefix over
    // intervals gives the left side of each threshold
    std::vector<MomentAcc> acc(cand.size() + 1);
    for (auto* it = begin; it != end; ++it) {
      const double v = ds.records[*it].x[f];
      const std::size_t pos =
          std::lower_bound(cand.begin(), cand.end(), v) - cand.begin();
      acc[pos].add(targets[*it].estimator);
    }
    MomentAcc left;
    for (std::size_t j = 0; j < cand.size(); ++j) {
      left.merge(acc[j]);
      if (left.n < static_cast<double>(cfg.min_leaf)) continue;
      MomentAcc right;
      right.n = node.n - left.n;
      right.sum = node.sum - left.sum;
      right.sumsq = node.sumsq - left.sumsq;
      if (right.n < static_cast<double>(cfg.min_leaf)) break;
      const double ss = left.ss() + right.ss();
      if (ss < best.children_ss) {
        best.found = true;
        best.children_ss = ss;
        best.cond = {f, false, cand[j], {}};
      }
    }
    return best;
  }

  FeatureBest best_categorical(std::size_t f, std::uint32_t* begin, std::uint32_t* end,
                               const MomentAcc& node) const {
    FeatureBest best;
    const std::size_t card = ds.schema.cardinality(f);
    std::vector<MomentAcc> acc(card);  // unknown levels never go left
    for (auto* it = begin; it != end; ++it) {
      const auto lvl = ds.records[*it].levels[f];
      if (lvl != kUnknownLevel) acc[static_cast<std::size_t>(lvl)].add(targets[*it].estimator);
    }
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < card; ++l)
      if (acc[l].n > 0.0) present.push_back(l);
    if (present.size() < 2) return best;
    std::sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
      const double ma = acc[a].sum / acc[a].n, mb = acc[b].sum / acc[b].n;
      if (ma != mb) return ma < mb;
      return a < b;
    });
    MomentAcc left;
    for (std::size_t p = 0; p + 1 < present.size(); ++p) {
      left.merge(acc[present[p]]);
      if (left.n < static_cast<double>(cfg.min_leaf)) continue;
      MomentAcc right;
      right.n = node.n - left.n;
      right.sum = node.sum - left.sum;
      right.sumsq = node.sumsq - left.sumsq;
      if (right.n < static_cast<double>(cfg.min_leaf)) continue;
      const double ss = left.ss() + right.ss();
      if (ss < best.children_ss) {
        best.found = true;
        best.children_ss = ss;
        best.cond.feature = d_cont + f;
        best.cond.categorical = true;
        best.cond.threshold = 0.0;
        best.cond.left_levels.assign(present.begin(), present.begin() + p + 1);
        std::sort(best.cond.left_levels.begin(), best.cond.left_levels.end());
      }
    }
    return best;
  }

  bool goes_left(const SplitCondition& c, const MixedRecord& r) const {
    if (!c.categorical) return r.x[c.feature] <= c.threshold;
    const auto lvl = r.levels[c.feature - d_cont];
    if (lvl == kUnknownLevel) return false;
    return std::binary_search(c.left_levels.begin(), c.left_levels.end(), lvl);
  }

  std::unique_ptr<TreeNode> build(std::uint32_t* begin, std::uint32_t* end,
                                  std::size_t depth) {
    auto node = std::make_unique<TreeNode>();
    MomentAcc m;
    for (auto* it = begin; it != end; ++it) m.add(targets[*it].estimator);
    node->count = static_cast<std::size_t>(end - begin);
    node->mean = m.sum / m.n;
    node->variance = std::max(0.0, m.ss() / m.n);
    node->num_vars = depth;

    if (depth >= cfg.l_max || node->count < 2 * cfg.min_leaf || node->count < 2 ||
        m.ss() <= kSplitGainEps)
      return node;

    const std::size_t nf = d_cont + d_cat;
    std::vector<FeatureBest> per_feature(nf);
    for_each_chunk(
        nf, cfg.workers,
        [&](std::size_t, std::size_t b, std::size_t e) {
          for (std::size_t f = b; f < e; ++f)
            per_feature[f] = f < d_cont ? best_continuous(f, begin, end, m)
                                        : best_categorical(f - d_cont, begin, end, m);
        },
        /*chunk=*/1);

    const FeatureBest* winner = nullptr;
    for (const auto& fb : per_feature)
      if (fb.found && (!winner || fb.children_ss < winner->children_ss)) winner = &fb;
    if (!winner || m.ss() - winner->children_ss <= kSplitGainEps) return node;

    auto* mid = std::stable_partition(begin, end, [&](std::uint32_t i) {
      return goes_left(winner->cond, ds.records[i]);
    });
    if (mid == begin || mid == end) return node;  // degenerate under fp ties

    node->split = winner->cond;
    node->left = build(begin, mid, depth + 1);
    node->right = build(mid, end, depth + 1);
    return node;
  }
};

void collect_leaves(const TreeNode& node, double total,
                    ComplexityMetrics* out) {
  if (node.is_leaf()) {
    out->wv += node.variance * (static_cast<double>(node.count) / total);
    out->num_clusters += 1;
    out->nv_total += node.num_vars;
    return;
  }
  collect_leaves(*node.left, total, out);
  collect_leaves(*node.right, total, out);
}

void prune_node(TreeNode* node, double lambda) {
  if (node->is_leaf()) return;
  prune_node(node->left.get(), lambda);
  prune_node(node->right.get(), lambda);
  const double n = static_cast<double>(node->count);
  const double split_variance =
      (node->left->variance * static_cast<double>(node->left->count) +
       node->right->variance * static_cast<double>(node->right->count)) /
      n;
  const double delta_e = split_variance - node->variance;
  const double delta_nv = static_cast<double>(node->left->num_vars) +
                          static_cast<double>(node->right->num_vars) -
                          static_cast<double>(node->num_vars);
  if (-delta_e - lambda * delta_nv <= 0.0) {
    node->split.reset();
    node->left.reset();
    node->right.reset();
  }
}

}  // namespace

void TreeConfig::validate() const {
  if (l_max == 0) throw ValidationError("tree: l_max must be at least 1");
  if (bins < 2) throw ValidationError("tree: bins must be at least 2");
  if (min_leaf == 0) throw ValidationError("tree: min_leaf must be at least 1");
}

std::unique_ptr<TreeNode> TreeNode::clone() const {
  auto out = std::make_unique<TreeNode>();
  out->count = count;
  out->mean = mean;
  out->variance = variance;
  out->num_vars = num_vars;
  out->split = split;
  if (left) out->left = left->clone();
  if (right) out->right = right->clone();
  return out;
}

SurrogateTree SurrogateTree::clone() const {
  SurrogateTree out;
  out.root = root ? root->clone() : nullptr;
  out.thresholds = thresholds;
  out.config = config;
  out.total_count = total_count;
  return out;
}

SurrogateTree build_full_tree(const Dataset& ds, const std::vector<EstimatorTarget>& targets,
                              const TreeConfig& cfg, const Thresholds& th) {
  cfg.validate();
  th.validate();
  if (ds.size() == 0) throw ValidationError("tree: dataset is empty");
  if (targets.size() != ds.size())
    throw ValidationError("tree: targets do not align with the dataset");
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (targets[i].index != i)
      throw ValidationError("tree: targets must be in record order");

  Builder b(ds, targets, cfg);
  SurrogateTree tree;
  tree.thresholds = th;
  tree.config = cfg;
  tree.total_count = ds.size();
  tree.root = b.build(b.rows.data(), b.rows.data() + b.rows.size(), 0);
  return tree;
}

SurrogateTree prune(const SurrogateTree& tree, double lambda) {
  if (!tree.root) throw ValidationError("prune: empty tree");
  if (!(lambda >= 0.0)) throw ValidationError("prune: lambda must be non-negative");
  SurrogateTree out = tree.clone();
  prune_node(out.root.get(), lambda);
  return out;
}

double weighted_variance(const SurrogateTree& tree) {
  if (!tree.root) throw ValidationError("weighted_variance: empty tree");
  ComplexityMetrics m;
  collect_leaves(*tree.root, static_cast<double>(tree.total_count), &m);
  return m.wv;
}

ComplexityMetrics quality(const SurrogateTree& tree, double lambda) {
  if (!tree.root) throw ValidationError("quality: empty tree");
  if (!(lambda >= 0.0)) throw ValidationError("quality: lambda must be non-negative");
  ComplexityMetrics m;
  collect_leaves(*tree.root, static_cast<double>(tree.total_count), &m);
  m.lambda = lambda;
  m.q = -m.wv - lambda * static_cast<double>(m.nv_total);
  return m;
}

RangeClass classify_leaf(const TreeNode& leaf, const Thresholds& th) {
  if (leaf.mean < th.adt) return RangeClass::anomalous;
  if (leaf.mean >= th.ndt) return RangeClass::normal;
  return RangeClass::transition;
}

const TreeNode& predict(const SurrogateTree& tree, const MixedRecord& r) {
  if (!tree.root) throw ValidationError("predict: empty tree");
  const TreeNode* node = tree.root.get();
  while (!node->is_leaf()) {
    const auto& c = *node->split;
    bool left;
    if (!c.categorical) {
      left = r.x.at(c.feature) <= c.threshold;
    } else {
      const auto lvl = r.levels.at(c.feature - (r.x.size()));
      left = lvl != kUnknownLevel &&
             std::binary_search(c.left_levels.begin(), c.left_levels.end(), lvl);
    }
    node = left ? node->left.get() : node->right.get();
  }
  return *node;
}

}  // namespace eadmnc
