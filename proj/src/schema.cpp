#include "eadmnc/schema.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "eadmnc/errors.hpp"

namespace eadmnc {

std::size_t Schema::one_hot_width() const {
  std::size_t w = 0;
  for (const auto& c : categoricals) w += c.levels.size();
  return w;
}

std::size_t Schema::block_offset(std::size_t f) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < f; ++i) off += categoricals[i].levels.size();
  return off;
}

std::pair<std::size_t, std::size_t> Schema::block_of(std::size_t j) const {
  std::size_t off = 0;
  for (std::size_t f = 0; f < categoricals.size(); ++f) {
    const std::size_t card = categoricals[f].levels.size();
    if (j < off + card) return {f, j - off};
    off += card;
  }
  throw ValidationError("one-hot position " + std::to_string(j) +
                        " out of range (width " + std::to_string(off) + ")");
}

std::int32_t Schema::level_of(std::size_t f, const std::string& value) const {
  const auto& lv = categoricals[f].levels;
  auto it = std::find(lv.begin(), lv.end(), value);
  return it == lv.end() ? kUnknownLevel : static_cast<std::int32_t>(it - lv.begin());
}

void Schema::validate() const {
  std::unordered_set<std::string> names;
  auto check_name = [&](const std::string& n, const char* kind) {
    if (n.empty())
      throw ValidationError(std::string(kind) + " feature with empty name");
    if (!names.insert(n).second)
      throw ValidationError("duplicate feature name \"" + n + "\"");
  };
  for (const auto& n : continuous) check_name(n, "continuous");
  for (const auto& c : categoricals) {
    check_name(c.name, "categorical");
    if (c.levels.empty())
      throw ValidationError("categorical \"" + c.name + "\" has no levels");
    std::unordered_set<std::string> lv(c.levels.begin(), c.levels.end());
    if (lv.size() != c.levels.size())
      throw ValidationError("categorical \"" + c.name + "\" has duplicate levels");
  }
  if (!label_column.empty() && names.count(label_column))
    throw ValidationError("label column \"" + label_column +
                          "\" collides with a feature name");
  if (continuous.empty() && categoricals.empty())
    throw ValidationError("schema has no features");
}

void Dataset::validate() const {
  schema.validate();
  const std::size_t d = schema.continuous_dim();
  const std::size_t c = schema.categorical_count();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.x.size() != d)
      throw ValidationError("record " + std::to_string(i) + " has " +
                            std::to_string(r.x.size()) + " continuous values, expected " +
                            std::to_string(d));
    if (r.levels.size() != c)
      throw ValidationError("record " + std::to_string(i) + " has " +
                            std::to_string(r.levels.size()) + " categorical values, expected " +
                            std::to_string(c));
    for (std::size_t f = 0; f < c; ++f) {
      const auto lvl = r.levels[f];
      if (lvl != kUnknownLevel &&
          (lvl < 0 || static_cast<std::size_t>(lvl) >= schema.cardinality(f)))
        throw ValidationError("record " + std::to_string(i) + ", feature \"" +
                              schema.categoricals[f].name + "\": level " +
                              std::to_string(lvl) + " out of range");
    }
    for (double v : r.x)
      if (!std::isfinite(v))
        throw ValidationError("record " + std::to_string(i) +
                              " has a non-finite continuous value");
  }
  if (!standardization_stats.empty() && standardization_stats.size() != d)
    throw ValidationError("standardization stats size mismatch");
}

std::vector<std::uint8_t> OneHotView::mask(std::size_t j) const {
  if (j >= y.size())
    throw ValidationError("mask position " + std::to_string(j) + " out of range");
  std::vector<std::uint8_t> m(y.size(), 0);
  m[j] = 1;
  return m;
}

OneHotView one_hot(const MixedRecord& r, const Schema& schema) {
  if (r.levels.size() != schema.categorical_count())
    throw ValidationError("record has " + std::to_string(r.levels.size()) +
                          " categorical values, expected " +
                          std::to_string(schema.categorical_count()));
  OneHotView v;
  v.y.assign(schema.one_hot_width(), 0);
  std::size_t off = 0;
  for (std::size_t f = 0; f < schema.categorical_count(); ++f) {
    const std::size_t card = schema.cardinality(f);
    const auto lvl = r.levels[f];
    if (lvl != kUnknownLevel) {
      if (lvl < 0 || static_cast<std::size_t>(lvl) >= card)
        throw ValidationError("feature \"" + schema.categoricals[f].name + "\": level " +
                              std::to_string(lvl) + " out of range");
      v.y[off + static_cast<std::size_t>(lvl)] = 1;
    }
    off += card;
  }
  return v;
}

std::vector<std::int32_t> one_hot_decode(const OneHotView& v, const Schema& schema) {
  if (v.y.size() != schema.one_hot_width())
    throw ValidationError("one-hot width mismatch");
  std::vector<std::int32_t> levels(schema.categorical_count(), kUnknownLevel);
  std::size_t off = 0;
  for (std::size_t f = 0; f < schema.categorical_count(); ++f) {
    const std::size_t card = schema.cardinality(f);
    for (std::size_t l = 0; l < card; ++l) {
      if (!v.y[off + l]) continue;
      if (levels[f] != kUnknownLevel)
        throw ValidationError("one-hot block " + std::to_string(f) + " has multiple bits set");
      levels[f] = static_cast<std::int32_t>(l);
    }
    off += card;
  }
  return levels;
}

Dataset standardize(const Dataset& ds) {
  if (ds.standardized())
    throw ValidationError("dataset is already standardized");
  const std::size_t d = ds.schema.continuous_dim();
  const std::size_t n = ds.size();
  if (n == 0) throw ValidationError("cannot standardize an empty dataset");

  Dataset out = ds;
  out.standardization_stats.assign(d, FeatureStats{});
  for (std::size_t f = 0; f < d; ++f) {
    double sum = 0.0;
    for (const auto& r : ds.records) sum += r.x[f];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : ds.records) {
      const double dv = r.x[f] - mean;
      ss += dv * dv;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    out.standardization_stats[f] = {mean, sd > 0.0 ? sd : 1.0};
  }
  for (auto& r : out.records)
    for (std::size_t f = 0; f < d; ++f) {
      const auto& s = out.standardization_stats[f];
      r.x[f] = (r.x[f] - s.mean) / s.stddev;
    }
  return out;
}

double destandardize(const FeatureStats& s, double value) {
  return value * s.stddev + s.mean;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ValidationError("split fraction must lie in [0, 1]");
  const std::size_t n = ds.size();
  std::vector<std::size_t> normal_idx, anomalous_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.records[i].label == Label::anomalous)
      anomalous_idx.push_back(i);
    else
      normal_idx.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(normal_idx.begin(), normal_idx.end(), rng);

  const std::size_t want =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  const std::size_t take = std::min(want, normal_idx.size());

  std::vector<std::size_t> train_idx(normal_idx.begin(), normal_idx.begin() + take);
  std::vector<std::size_t> test_idx(normal_idx.begin() + take, normal_idx.end());
  test_idx.insert(test_idx.end(), anomalous_idx.begin(), anomalous_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto gather = [&](const std::vector<std::size_t>& idx) {
    Dataset out;
    out.schema = ds.schema;
    out.standardization_stats = ds.standardization_stats;
    out.records.reserve(idx.size());
    for (std::size_t i : idx) out.records.push_back(ds.records[i]);
    return out;
  };
  return {gather(train_idx), gather(test_idx)};
}

}  // namespace eadmnc
