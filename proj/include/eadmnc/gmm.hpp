#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace eadmnc {

struct GmmParams {
  std::vector<double> weights;                                // simplex over components
  std::vector<std::vector<double>> means;                     // K x d
  std::vector<std::vector<std::vector<double>>> covariances;  // K x d x d, SPD after ridging

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means[0].size(); }
  void validate() const;
};

struct EmTrace {
  GmmParams params;
  std::vector<double> log_likelihood;  // one entry per EM iteration, non-decreasing
  std::size_t ridge_repairs = 0;       // covariance repairs needed during fitting
};

// Lloyd iterations on a sampled subset; returns component weights, means and
// per-cluster covariances as the EM starting point.
GmmParams init_kmeans(const std::vector<std::vector<double>>& data, std::size_t k,
                      double subset_fraction, std::uint64_t seed, int workers = 1);

EmTrace fit_em(const std::vector<std::vector<double>>& data, GmmParams init,
               std::size_t max_iter, double tol, int workers = 1);

double log_sum_exp(std::span<const double> v);

// Caches Cholesky factors of the component covariances; evaluation is a
// forward substitution per component. Construction repairs a non-SPD
// covariance by escalating a diagonal ridge.
class GmmDensity {
 public:
  explicit GmmDensity(const GmmParams& params);

  std::size_t components() const { return k_; }
  std::size_t dim() const { return d_; }
  std::size_t repairs() const { return repairs_; }

  // scratch must hold dim() doubles, out components() doubles.
  void component_log_pdfs(std::span<const double> x, std::span<double> out,
                          std::span<double> scratch) const;
  std::vector<double> component_log_pdfs(std::span<const double> x) const;
  double log_pdf(std::span<const double> x) const;  // log sum_c w_c N_c(x)
  std::size_t assign(std::span<const double> x) const;
  double log_weight(std::size_t c) const { return log_weights_[c]; }

 private:
  std::size_t k_ = 0, d_ = 0, repairs_ = 0;
  std::vector<double> log_weights_;
  std::vector<double> means_;     // K x d
  std::vector<double> chol_;      // K x d x d lower factors, row-major
  std::vector<double> log_norm_;  // -d/2 log(2 pi) - sum_i log L_ii
};

// Convenience wrappers; hot paths should hold a GmmDensity instead.
std::vector<double> component_log_pdfs(const GmmParams& params, std::span<const double> x);
double log_pdf(const GmmParams& params, std::span<const double> x);
std::size_t assign(const GmmParams& params, std::span<const double> x);

}  // namespace eadmnc
