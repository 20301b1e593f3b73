#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace eadmnc {

enum class Label : std::uint8_t { none = 0, normal = 1, anomalous = 2 };

// Level index used for categorical values not present in the schema
// dictionary. Encodes to an all-zero one-hot block and routes to the right
// branch at categorical tree splits.
inline constexpr std::int32_t kUnknownLevel = -1;

struct CategoricalFeature {
  std::string name;
  std::vector<std::string> levels;  // level index -> original value
};

struct Schema {
  std::vector<std::string> continuous;
  std::vector<CategoricalFeature> categoricals;
  std::string label_column;                   // empty: unlabeled data
  std::vector<std::string> anomalous_values;  // label values treated as anomalous

  std::size_t continuous_dim() const { return continuous.size(); }
  std::size_t categorical_count() const { return categoricals.size(); }
  std::size_t cardinality(std::size_t f) const { return categoricals[f].levels.size(); }
  // Total one-hot width across all categorical features.
  std::size_t one_hot_width() const;
  // Start offset of feature f's block within the one-hot vector.
  std::size_t block_offset(std::size_t f) const;
  // Inverse of block layout: one-hot position -> (feature, level).
  std::pair<std::size_t, std::size_t> block_of(std::size_t j) const;
  int32_t level_of(std::size_t f, const std::string& value) const;  // kUnknownLevel if absent

  void validate() const;  // throws ValidationError
};

struct MixedRecord {
  std::vector<double> x;
  std::vector<std::int32_t> levels;
  Label label = Label::none;
};

struct FeatureStats {
  double mean = 0.0;
  double stddev = 1.0;
};

struct Dataset {
  Schema schema;
  std::vector<MixedRecord> records;
  // Non-empty iff the continuous block has been standardized; one entry per
  // continuous feature, holding the original mean/stddev.
  std::vector<FeatureStats> standardization_stats;

  bool standardized() const { return !standardization_stats.empty(); }
  std::size_t size() const { return records.size(); }
  void validate() const;  // record shapes and level ranges against schema
};

struct OneHotView {
  std::vector<std::uint8_t> y;  // one bit per level, at most one set per block
  // Unit mask selecting coordinate j.
  std::vector<std::uint8_t> mask(std::size_t j) const;
};

OneHotView one_hot(const MixedRecord& r, const Schema& schema);
std::vector<std::int32_t> one_hot_decode(const OneHotView& v, const Schema& schema);

// Zero-mean unit-variance over the continuous block (population stddev).
// Constant features keep stddev 1 so they map to zero. Throws if ds is
// already standardized.
Dataset standardize(const Dataset& ds);
double destandardize(const FeatureStats& s, double value);

// Shuffled split: train takes round(fraction*n) records drawn only from
// non-anomalous-labelled ones; every anomalous record lands in test. The two
// sides partition the input exactly.
std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed);

}  // namespace eadmnc
