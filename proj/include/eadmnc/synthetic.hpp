#pragma once

#include <cstdint>

#include "eadmnc/schema.hpp"

namespace eadmnc {

// Marginal stddev of each continuous feature under the normal process (two
// balanced unit-variance components at +/-kSyntheticOffset).
inline constexpr double kSyntheticOffset = 1.5;
inline constexpr double kSyntheticShiftSigmas = 6.0;
// Categorical level forced onto perturbed variables. It also appears in
// normal records at a small background rate, so a single perturbed
// categorical is weak evidence on its own; detection difficulty then scales
// with how many variables are perturbed.
inline constexpr std::int32_t kSyntheticAnomalyLevel = 2;
inline constexpr double kSyntheticRareLevelProb = 0.10;

double synthetic_marginal_sigma();

// Mixed-type benchmark generator. Normal records come from a two-component
// process: continuous features are N(-offset, 1) or N(+offset, 1) by
// component, categoricals (cardinality 3) follow component-conditional level
// probabilities (0.75, 0.15, 0.10) vs (0.15, 0.75, 0.10). A record is
// anomalous with probability anomaly_ratio; exactly nv distinct variables are
// then perturbed: continuous ones are shifted away from zero by
// kSyntheticShiftSigmas marginal sigmas, categorical ones are set to the rare
// level. Each record derives its RNG from (seed, index), so output is
// identical for any worker count.
Dataset generate_synthetic(std::size_t n, std::size_t d_cont, std::size_t d_cat,
                           std::size_t nv, double anomaly_ratio, std::uint64_t seed,
                           int workers = 1);

// True iff continuous value v can only result from a perturbation.
bool synthetic_continuous_perturbed(double v);

}  // namespace eadmnc
