#include "eadmnc/synthetic.hpp"

#include <cmath>
#include <random>

#include "eadmnc/errors.hpp"
#include "eadmnc/parallel.hpp"

namespace eadmnc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t record_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 1));
}

}  // namespace

double synthetic_marginal_sigma() {
  return std::sqrt(1.0 + kSyntheticOffset * kSyntheticOffset);
}

bool synthetic_continuous_perturbed(double v) {
  // Normal values stay within offset + ~7.5 sigma of zero; perturbed ones are
  // pushed at least kSyntheticShiftSigmas marginal sigmas (~10.8) away.
  return std::abs(v) >= 9.0;
}

Dataset generate_synthetic(std::size_t n, std::size_t d_cont, std::size_t d_cat,
                           std::size_t nv, double anomaly_ratio, std::uint64_t seed,
                           int workers) {
  if (n == 0) throw ValidationError("synthetic: n must be positive");
  if (d_cont == 0 || d_cat == 0)
    throw ValidationError("synthetic: need at least one continuous and one categorical feature");
  if (!(anomaly_ratio >= 0.0 && anomaly_ratio < 1.0))
    throw ValidationError("synthetic: anomaly_ratio must lie in [0, 1)");
  if (nv == 0 || nv > d_cont + d_cat)
    throw ValidationError("synthetic: nv must lie in [1, d_cont + d_cat]");

  Dataset ds;
  for (std::size_t f = 0; f < d_cont; ++f)
    ds.schema.continuous.push_back("num_" + std::to_string(f));
  for (std::size_t f = 0; f < d_cat; ++f)
    ds.schema.categoricals.push_back({"cat_" + std::to_string(f), {"L0", "L1", "L2"}});
  ds.schema.label_column = "label";
  ds.schema.anomalous_values = {"anomalous"};

  const double shift = kSyntheticShiftSigmas * synthetic_marginal_sigma();
  const std::size_t dims = d_cont + d_cat;
  ds.records.resize(n);

  for_each_chunk(n, workers, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<std::size_t> pick(dims);
    for (std::size_t i = b; i < e; ++i) {
      std::mt19937_64 rng(record_seed(seed, i));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);

      MixedRecord r;
      const bool anomalous = unif(rng) < anomaly_ratio;
      const int comp = unif(rng) < 0.5 ? 0 : 1;
      const double mean = comp == 0 ? -kSyntheticOffset : kSyntheticOffset;
      const double p0 = comp == 0 ? 0.75 : 0.15;
      const double p1 = 1.0 - kSyntheticRareLevelProb - p0;

      r.x.resize(d_cont);
      for (std::size_t f = 0; f < d_cont; ++f) r.x[f] = mean + gauss(rng);
      r.levels.resize(d_cat);
      for (std::size_t f = 0; f < d_cat; ++f) {
        const double u = unif(rng);
        r.levels[f] = u < p0 ? 0 : u < p0 + p1 ? 1 : 2;
      }

      if (anomalous) {
        for (std::size_t v = 0; v < dims; ++v) pick[v] = v;
        for (std::size_t v = 0; v < nv; ++v) {  // partial Fisher-Yates
          std::uniform_int_distribution<std::size_t> u(v, dims - 1);
          std::swap(pick[v], pick[u(rng)]);
        }
        for (std::size_t v = 0; v < nv; ++v) {
          const std::size_t var = pick[v];
          if (var < d_cont) {
            const double sign = r.x[var] < 0.0 ? -1.0 : 1.0;
            r.x[var] += sign * shift;
          } else {
            r.levels[var - d_cont] = kSyntheticAnomalyLevel;
          }
        }
        r.label = Label::anomalous;
      } else {
        r.label = Label::normal;
      }
      ds.records[i] = std::move(r);
    }
  });
  return ds;
}

}  // namespace eadmnc
