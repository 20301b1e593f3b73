#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "eadmnc/eval.hpp"

namespace eadmnc {

struct SynthConfig {
  std::size_t n = 20000;
  std::size_t d_cont = 4;
  std::size_t d_cat = 28;
  std::size_t nv = 4;
  double anomaly_ratio = 0.1;
};

struct RunConfig {
  std::string dataset;     // CSV path
  std::string schema;      // schema sidecar path
  std::string output_dir = "out";
  std::string name;        // dataset display name; defaults to the CSV stem
  std::uint64_t seed = 0;
  int workers = 0;         // 0 = all hardware threads
  double train_fraction = 0.7;
  std::size_t repetitions = 5;
  double lambda = 1e-4;
  DetectorConfig detector;
  Thresholds thresholds;
  TreeConfig tree;
  ExplainConfig explain;
  SynthConfig synth;
};

// Parses and validates; unknown keys and out-of-range values are collected
// and reported together with their field paths.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json effective_config_json(const RunConfig& cfg);

}  // namespace eadmnc
