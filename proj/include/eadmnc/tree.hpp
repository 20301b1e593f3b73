#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "eadmnc/detector.hpp"
#include "eadmnc/schema.hpp"

namespace eadmnc {

struct TreeConfig {
  std::size_t l_max = 5;    // depth cap; num_vars never exceeds it
  std::size_t bins = 40;    // quantile candidate count per continuous feature
  std::size_t min_leaf = 1;
  int workers = 1;
  void validate() const;
};

// feature indexes continuous features first, then categoricals.
struct SplitCondition {
  std::size_t feature = 0;
  bool categorical = false;
  double threshold = 0.0;                  // continuous: x <= threshold goes left
  std::vector<std::int32_t> left_levels;   // categorical: level in set goes left
};

struct TreeNode {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;      // population variance of targets in the node
  std::size_t num_vars = 0;   // split conditions on the path from the root
  std::optional<SplitCondition> split;
  std::unique_ptr<TreeNode> left, right;

  bool is_leaf() const { return !split.has_value(); }
  std::unique_ptr<TreeNode> clone() const;
};

struct SurrogateTree {
  std::unique_ptr<TreeNode> root;
  Thresholds thresholds;
  TreeConfig config;
  std::size_t total_count = 0;
  SurrogateTree clone() const;
};

struct ComplexityMetrics {
  double wv = 0.0;             // sum of leaf variance * leaf share
  std::size_t num_clusters = 0;
  std::size_t nv_total = 0;    // sum of num_vars over leaves
  double lambda = 0.0;
  double q = 0.0;              // -wv - lambda * nv_total
};

enum class RangeClass { anomalous, transition, normal };

// CART with variance impurity on the rank-estimator targets. Continuous split
// candidates are global quantile bins; categorical candidates are prefix
// subsets of the level ordering by mean target. targets[i].index must equal i
// and align with ds.records.
SurrogateTree build_full_tree(const Dataset& ds, const std::vector<EstimatorTarget>& targets,
                              const TreeConfig& cfg, const Thresholds& th);

// Bottom-up pruning: a split is collapsed when the variance it removes does
// not pay for the conditions it adds at rate lambda. The input is not
// modified.
SurrogateTree prune(const SurrogateTree& tree, double lambda);

double weighted_variance(const SurrogateTree& tree);
ComplexityMetrics quality(const SurrogateTree& tree, double lambda);
RangeClass classify_leaf(const TreeNode& leaf, const Thresholds& th);
const TreeNode& predict(const SurrogateTree& tree, const MixedRecord& r);

}  // namespace eadmnc
