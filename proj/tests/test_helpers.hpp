#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

#include "eadmnc/schema.hpp"

namespace testutil {

// Unique scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path = base / ("eadmnc_test_" + std::to_string(::getpid()) + "_" +
                   std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Schema with nc continuous features c0..c(nc-1) and categorical features
// k0..k(ncat-1), each with the given cardinality (levels "v0", "v1", ...).
inline eadmnc::Schema make_schema(std::size_t nc, std::size_t ncat,
                                  std::size_t cardinality = 2) {
  eadmnc::Schema s;
  for (std::size_t i = 0; i < nc; ++i) s.continuous.push_back("c" + std::to_string(i));
  for (std::size_t f = 0; f < ncat; ++f) {
    eadmnc::CategoricalFeature cf;
    cf.name = "k" + std::to_string(f);
    for (std::size_t l = 0; l < cardinality; ++l)
      cf.levels.push_back("v" + std::to_string(l));
    s.categoricals.push_back(std::move(cf));
  }
  return s;
}

inline eadmnc::MixedRecord make_record(std::vector<double> x,
                                       std::vector<std::int32_t> levels,
                                       eadmnc::Label label = eadmnc::Label::none) {
  eadmnc::MixedRecord r;
  r.x = std::move(x);
  r.levels = std::move(levels);
  r.label = label;
  return r;
}

}  // namespace testutil
