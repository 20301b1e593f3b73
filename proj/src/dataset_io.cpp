#include "eadmnc/dataset_io.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "eadmnc/errors.hpp"

namespace eadmnc {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError("\"" + path + "\": " + e.what());
  }
  return j;
}

// Parses one CSV record starting at *pos; handles quoted fields with embedded
// separators, escaped quotes and newlines. Returns false at end of input.
bool next_csv_record(const std::string& text, std::size_t* pos,
                     std::vector<std::string>* fields, std::size_t* line_no) {
  fields->clear();
  std::size_t i = *pos;
  const std::size_t n = text.size();
  if (i >= n) return false;
  std::string field;
  bool quoted = false;
  for (;;) {
    if (i >= n) {
      fields->push_back(std::move(field));
      break;
    }
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        if (ch == '\n') ++*line_no;
        field.push_back(ch);
        ++i;
      }
      continue;
    }
    if (ch == '"' && field.empty()) {
      quoted = true;
      ++i;
    } else if (ch == ',') {
      fields->push_back(std::move(field));
      field.clear();
      ++i;
    } else if (ch == '\n' || ch == '\r') {
      fields->push_back(std::move(field));
      if (ch == '\r' && i + 1 < n && text[i + 1] == '\n') ++i;
      ++i;
      ++*line_no;
      break;
    } else {
      field.push_back(ch);
      ++i;
    }
  }
  *pos = i;
  return true;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

Schema load_schema(const std::string& path) {
  const json j = read_json_file(path);
  Schema s;
  try {
    for (const auto& n : j.value("continuous", json::array()))
      s.continuous.push_back(n.get<std::string>());
    for (const auto& c : j.value("categoricals", json::array())) {
      CategoricalFeature f;
      f.name = c.at("name").get<std::string>();
      for (const auto& l : c.value("levels", json::array()))
        f.levels.push_back(l.get<std::string>());
      s.categoricals.push_back(std::move(f));
    }
    s.label_column = j.value("label_column", std::string());
    for (const auto& v : j.value("anomalous_values", json::array()))
      s.anomalous_values.push_back(v.get<std::string>());
  } catch (const json::exception& e) {
    throw LoadError("\"" + path + "\": " + e.what());
  }
  return s;
}

void save_schema(const Schema& schema, const std::string& path) {
  json j;
  j["continuous"] = schema.continuous;
  j["categoricals"] = json::array();
  for (const auto& c : schema.categoricals)
    j["categoricals"].push_back({{"name", c.name}, {"levels", c.levels}});
  j["label_column"] = schema.label_column;
  j["anomalous_values"] = schema.anomalous_values;
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write \"" + path + "\"");
  out << j.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path, Schema schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::size_t pos = 0;
  std::size_t line_no = 1;
  std::vector<std::string> fields;
  if (!next_csv_record(text, &pos, &fields, &line_no))
    throw LoadError("\"" + path + "\": empty file");

  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t c = 0; c < fields.size(); ++c) col_of.emplace(fields[c], c);
  auto require_col = [&](const std::string& name) {
    auto it = col_of.find(name);
    if (it == col_of.end())
      throw LoadError("\"" + path + "\": header is missing column \"" + name + "\"");
    return it->second;
  };

  std::vector<std::size_t> cont_col(schema.continuous.size());
  for (std::size_t f = 0; f < schema.continuous.size(); ++f)
    cont_col[f] = require_col(schema.continuous[f]);
  std::vector<std::size_t> cat_col(schema.categoricals.size());
  std::vector<bool> build_levels(schema.categoricals.size());
  std::vector<std::unordered_map<std::string, std::int32_t>> level_of(schema.categoricals.size());
  for (std::size_t f = 0; f < schema.categoricals.size(); ++f) {
    cat_col[f] = require_col(schema.categoricals[f].name);
    build_levels[f] = schema.categoricals[f].levels.empty();
    for (std::size_t l = 0; l < schema.categoricals[f].levels.size(); ++l)
      level_of[f].emplace(schema.categoricals[f].levels[l], static_cast<std::int32_t>(l));
  }
  const bool labeled = !schema.label_column.empty();
  std::size_t label_col = labeled ? require_col(schema.label_column) : 0;

  Dataset ds;
  std::size_t row = 1;  // 1-based data row for messages
  while (next_csv_record(text, &pos, &fields, &line_no)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
    MixedRecord r;
    r.x.resize(schema.continuous.size());
    r.levels.resize(schema.categoricals.size());
    auto field_at = [&](std::size_t c, const std::string& name) -> const std::string& {
      if (c >= fields.size())
        throw LoadError("\"" + path + "\" row " + std::to_string(row) + ": column \"" +
                        name + "\" is missing");
      return fields[c];
    };
    for (std::size_t f = 0; f < schema.continuous.size(); ++f) {
      const std::string& raw = field_at(cont_col[f], schema.continuous[f]);
      char* end = nullptr;
      const double v = std::strtod(raw.c_str(), &end);
      if (raw.empty() || end != raw.c_str() + raw.size())
        throw LoadError("\"" + path + "\" row " + std::to_string(row) + ", column \"" +
                        schema.continuous[f] + "\": cannot parse \"" + raw + "\" as a number");
      r.x[f] = v;
    }
    for (std::size_t f = 0; f < schema.categoricals.size(); ++f) {
      const std::string& raw = field_at(cat_col[f], schema.categoricals[f].name);
      auto it = level_of[f].find(raw);
      if (it != level_of[f].end()) {
        r.levels[f] = it->second;
      } else if (build_levels[f]) {
        const auto idx = static_cast<std::int32_t>(schema.categoricals[f].levels.size());
        schema.categoricals[f].levels.push_back(raw);
        level_of[f].emplace(raw, idx);
        r.levels[f] = idx;
      } else {
        r.levels[f] = kUnknownLevel;
      }
    }
    if (labeled) {
      const std::string& raw = field_at(label_col, schema.label_column);
      const bool anom = std::find(schema.anomalous_values.begin(),
                                  schema.anomalous_values.end(),
                                  raw) != schema.anomalous_values.end();
      r.label = anom ? Label::anomalous : Label::normal;
    }
    ds.records.push_back(std::move(r));
    ++row;
  }
  ds.schema = std::move(schema);
  ds.validate();
  return ds;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write \"" + path + "\"");
  std::vector<std::string> header;
  for (const auto& n : ds.schema.continuous) header.push_back(n);
  for (const auto& c : ds.schema.categoricals) header.push_back(c.name);
  const bool labeled = !ds.schema.label_column.empty();
  if (labeled) header.push_back(ds.schema.label_column);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << csv_quote(header[i]);
  out << "\n";

  char num[64];
  for (const auto& r : ds.records) {
    bool first = true;
    auto sep = [&] {
      if (!first) out << ",";
      first = false;
    };
    for (double v : r.x) {
      sep();
      std::snprintf(num, sizeof(num), "%.17g", v);
      out << num;
    }
    for (std::size_t f = 0; f < r.levels.size(); ++f) {
      sep();
      const auto lvl = r.levels[f];
      out << (lvl == kUnknownLevel ? std::string()
                                   : csv_quote(ds.schema.categoricals[f].levels[lvl]));
    }
    if (labeled) {
      sep();
      if (r.label == Label::anomalous) {
        out << csv_quote(ds.schema.anomalous_values.empty() ? "anomalous"
                                                            : ds.schema.anomalous_values[0]);
      } else {
        out << "normal";
      }
    }
    out << "\n";
  }
}

}  // namespace eadmnc
