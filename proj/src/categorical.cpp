#include "eadmnc/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eadmnc/errors.hpp"

namespace eadmnc {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(sigmoid(t)) = -softplus(-t)
double log_sigmoid(double t) {
  if (t > 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

}  // namespace

std::size_t CategoricalModel::one_hot_width() const {
  return std::accumulate(cardinalities.begin(), cardinalities.end(), std::size_t{0});
}

double CategoricalModel::base(std::span<const double> x) const {
  if (x.size() != continuous_dim)
    throw ValidationError("continuous block has wrong dimension for categorical model");
  double z = w[continuous_dim];  // bias
  for (std::size_t f = 0; f < continuous_dim; ++f) z += w[f] * x[f];
  return z;
}

void CategoricalModel::validate() const {
  if (block_offsets.size() != cardinalities.size())
    throw ValidationError("categorical model layout arrays disagree");
  if (cardinalities.empty())
    throw ValidationError("categorical model has no categorical features");
  std::size_t off = 0;
  for (std::size_t f = 0; f < cardinalities.size(); ++f) {
    if (block_offsets[f] != off)
      throw ValidationError("categorical model block offsets are not dense");
    if (cardinalities[f] == 0)
      throw ValidationError("categorical model has an empty block");
    off += cardinalities[f];
  }
  if (w.size() != width())
    throw ValidationError("categorical model weight vector has wrong length");
  for (double v : w)
    if (!std::isfinite(v))
      throw ValidationError("categorical model has a non-finite weight");
}

CategoricalModel make_categorical_model(const Schema& schema) {
  if (schema.categorical_count() == 0)
    throw ValidationError("schema has no categorical features");
  CategoricalModel m;
  m.continuous_dim = schema.continuous_dim();
  for (std::size_t f = 0; f < schema.categorical_count(); ++f) {
    m.block_offsets.push_back(schema.block_offset(f));
    m.cardinalities.push_back(schema.cardinality(f));
  }
  m.w.assign(m.width(), 0.0);
  return m;
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("sgd: learning_rate must be positive");
  if (batch_size == 0) throw ValidationError("sgd: batch_size must be positive");
  if (epochs == 0) throw ValidationError("sgd: epochs must be positive");
  if (!(l2 >= 0.0)) throw ValidationError("sgd: l2 must be non-negative");
}

double term_estimator(const CategoricalModel& m, std::span<const double> x,
                      std::size_t j, bool y_j) {
  if (j >= m.one_hot_width())
    throw ValidationError("one-hot coordinate out of range");
  const double z = m.base(x) + m.coord_weight(j);
  return sigmoid(y_j ? z : -z);
}

double log_cond_prob_levels(const CategoricalModel& m, std::span<const double> x,
                            std::span<const std::int32_t> levels) {
  if (levels.size() != m.cardinalities.size())
    throw ValidationError("record has wrong categorical count for model");
  const double base = m.base(x);
  double total = 0.0;
  for (std::size_t f = 0; f < m.cardinalities.size(); ++f) {
    const std::size_t off = m.block_offsets[f];
    for (std::size_t l = 0; l < m.cardinalities[f]; ++l) {
      const double z = base + m.coord_weight(off + l);
      const bool on = levels[f] == static_cast<std::int32_t>(l);
      total += log_sigmoid(on ? z : -z);
    }
  }
  return total;
}

double log_cond_prob(const CategoricalModel& m, std::span<const double> x,
                     const OneHotView& y) {
  if (y.y.size() != m.one_hot_width())
    throw ValidationError("one-hot view has wrong width for model");
  const double base = m.base(x);
  double total = 0.0;
  for (std::size_t j = 0; j < y.y.size(); ++j) {
    const double z = base + m.coord_weight(j);
    total += log_sigmoid(y.y[j] ? z : -z);
  }
  return total;
}

double sgd_objective(const CategoricalModel& m, const Dataset& ds,
                     std::span<const std::size_t> rows, double l2) {
  double nll = 0.0;
  for (std::size_t i : rows)
    nll -= log_cond_prob_levels(m, ds.records[i].x, ds.records[i].levels);
  nll /= static_cast<double>(rows.size());
  double reg = 0.0;
  for (double v : m.w) reg += v * v;
  return nll + 0.5 * l2 * reg;
}

std::vector<double> sgd_gradient(const CategoricalModel& m, const Dataset& ds,
                                 std::span<const std::size_t> rows, double l2) {
  std::vector<double> grad(m.w.size(), 0.0);
  const std::size_t dc = m.continuous_dim;
  for (std::size_t i : rows) {
    const auto& r = ds.records[i];
    const double base = m.base(r.x);
    double gbase = 0.0;
    for (std::size_t f = 0; f < m.cardinalities.size(); ++f) {
      const std::size_t off = m.block_offsets[f];
      for (std::size_t l = 0; l < m.cardinalities[f]; ++l) {
        const std::size_t j = off + l;
        const double z = base + m.coord_weight(j);
        const bool on = r.levels[f] == static_cast<std::int32_t>(l);
        // d(-log sigmoid(s z))/dz = sigmoid(z) - y_j
        const double g = sigmoid(z) - (on ? 1.0 : 0.0);
        grad[dc + 1 + j] += g;
        gbase += g;
      }
    }
    for (std::size_t f = 0; f < dc; ++f) grad[f] += gbase * r.x[f];
    grad[dc] += gbase;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad[i] * inv + l2 * m.w[i];
  return grad;
}

CategoricalModel fit_sgd(const Dataset& ds, const SgdConfig& cfg) {
  cfg.validate();
  if (ds.size() == 0) throw TrainingError("sgd: no training data");
  CategoricalModel m = make_categorical_model(ds.schema);
  const std::size_t n = ds.size();
  const std::size_t dc = m.continuous_dim;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> grad(m.w.size());
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t p = start; p < end; ++p) {
        const auto& r = ds.records[order[p]];
        const double base = m.base(r.x);
        double gbase = 0.0;
        for (std::size_t f = 0; f < m.cardinalities.size(); ++f) {
          const std::size_t off = m.block_offsets[f];
          for (std::size_t l = 0; l < m.cardinalities[f]; ++l) {
            const std::size_t j = off + l;
            const double z = base + m.coord_weight(j);
            const bool on = r.levels[f] == static_cast<std::int32_t>(l);
            const double g = sigmoid(z) - (on ? 1.0 : 0.0);
            grad[dc + 1 + j] += g;
            gbase += g;
          }
        }
        for (std::size_t f = 0; f < dc; ++f) grad[f] += gbase * r.x[f];
        grad[dc] += gbase;
      }
      ++step;
      const double lr = cfg.learning_rate / std::sqrt(static_cast<double>(step));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < m.w.size(); ++i)
        m.w[i] -= lr * (grad[i] * inv + cfg.l2 * m.w[i]);
    }
  }
  m.validate();
  return m;
}

}  // namespace eadmnc
