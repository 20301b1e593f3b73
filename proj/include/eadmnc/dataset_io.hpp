#pragma once

#include <string>

#include "eadmnc/schema.hpp"

namespace eadmnc {

// Schema sidecar (JSON). Categorical level lists may be left empty in the
// file; load_dataset then builds dictionaries in first-appearance order.
Schema load_schema(const std::string& path);
void save_schema(const Schema& schema, const std::string& path);

// CSV with a header row. Columns are matched to the schema by name; columns
// not named by the schema are ignored. Errors name the offending row and
// column. Values of the label column listed in schema.anomalous_values map to
// Label::anomalous, any other value to Label::normal.
Dataset load_dataset(const std::string& path, Schema schema);
void save_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace eadmnc
