#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eadmnc/schema.hpp"

namespace eadmnc {

// Logistic model of the one-hot categorical block conditioned on the
// continuous features. One shared weight vector scores every coordinate:
// z_j = <w_cont, x> + w_bias + w_onehot[j], and coordinate j's estimator is
// sigmoid((2*y_j - 1) * z_j).
struct CategoricalModel {
  std::vector<double> w;  // layout: [continuous | bias | one-hot]
  std::size_t continuous_dim = 0;
  std::vector<std::size_t> block_offsets;   // per categorical feature
  std::vector<std::size_t> cardinalities;   // per categorical feature

  std::size_t one_hot_width() const;
  std::size_t width() const { return continuous_dim + 1 + one_hot_width(); }
  double base(std::span<const double> x) const;  // <w_cont, x> + bias
  double coord_weight(std::size_t j) const { return w[continuous_dim + 1 + j]; }
  void validate() const;
};

CategoricalModel make_categorical_model(const Schema& schema);

struct SgdConfig {
  double learning_rate = 0.1;  // decayed as lr / sqrt(step)
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  void validate() const;
};

double term_estimator(const CategoricalModel& m, std::span<const double> x,
                      std::size_t j, bool y_j);
double log_cond_prob(const CategoricalModel& m, std::span<const double> x,
                     const OneHotView& y);
// Same sum without materializing a OneHotView.
double log_cond_prob_levels(const CategoricalModel& m, std::span<const double> x,
                            std::span<const std::int32_t> levels);

// Regularized NLL of the rows and its gradient in w; exposed so the gradient
// can be checked against finite differences.
double sgd_objective(const CategoricalModel& m, const Dataset& ds,
                     std::span<const std::size_t> rows, double l2);
std::vector<double> sgd_gradient(const CategoricalModel& m, const Dataset& ds,
                                 std::span<const std::size_t> rows, double l2);

// Mini-batch SGD from zero weights over shuffled epochs. Expects the
// continuous block of ds to be standardized upstream.
CategoricalModel fit_sgd(const Dataset& ds, const SgdConfig& cfg);

}  // namespace eadmnc
