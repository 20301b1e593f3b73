#include "eadmnc/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "eadmnc/errors.hpp"
#include "eadmnc/parallel.hpp"

namespace eadmnc {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::vector<double> feature_variances(const std::vector<std::vector<double>>& data) {
  const std::size_t n = data.size();
  const std::size_t d = data[0].size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& row : data)
    for (std::size_t f = 0; f < d; ++f) mean[f] += row[f];
  for (std::size_t f = 0; f < d; ++f) mean[f] /= static_cast<double>(n);
  for (const auto& row : data)
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = row[f] - mean[f];
      var[f] += dv * dv;
    }
  for (std::size_t f = 0; f < d; ++f) var[f] /= static_cast<double>(n);
  return var;
}

// Cholesky with escalating diagonal repair. Returns the number of repair
// rounds needed (0 when the matrix was SPD as given).
std::size_t cholesky_with_repair(const std::vector<std::vector<double>>& cov,
                                 std::size_t d, double* lower_out) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = cov[i][j];
  m = 0.5 * (m + m.transpose().eval());

  double scale = m.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  double bump = 0.0;
  for (std::size_t attempt = 0;; ++attempt) {
    Eigen::MatrixXd trial = m;
    if (bump > 0.0) trial.diagonal().array() += bump;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      bool ok = true;
      for (std::size_t i = 0; i < d && ok; ++i)
        if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) ok = false;
      if (ok) {
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) lower_out[i * d + j] = j <= i ? L(i, j) : 0.0;
        return attempt;
      }
    }
    if (attempt >= 40)
      throw TrainingError("covariance matrix could not be repaired to SPD");
    bump = bump == 0.0 ? 1e-12 * scale : bump * 10.0;
  }
}

}  // namespace

void GmmParams::validate() const {
  const std::size_t k = components();
  if (k == 0) throw ValidationError("mixture has no components");
  if (means.size() != k || covariances.size() != k)
    throw ValidationError("mixture parameter arrays disagree on component count");
  const std::size_t d = dim();
  if (d == 0) throw ValidationError("mixture dimension is zero");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ValidationError("component weight out of range");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-6)
    throw ValidationError("component weights do not sum to 1");
  for (std::size_t c = 0; c < k; ++c) {
    if (means[c].size() != d) throw ValidationError("component mean has wrong dimension");
    if (covariances[c].size() != d)
      throw ValidationError("component covariance has wrong dimension");
    for (std::size_t i = 0; i < d; ++i) {
      if (covariances[c][i].size() != d)
        throw ValidationError("component covariance is not square");
      for (std::size_t j = 0; j < d; ++j)
        if (std::abs(covariances[c][i][j] - covariances[c][j][i]) >
            1e-9 * (1.0 + std::abs(covariances[c][i][j])))
          throw ValidationError("component covariance is not symmetric");
    }
  }
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

GmmDensity::GmmDensity(const GmmParams& params) {
  params.validate();
  k_ = params.components();
  d_ = params.dim();
  log_weights_.resize(k_);
  means_.resize(k_ * d_);
  chol_.resize(k_ * d_ * d_);
  log_norm_.resize(k_);
  for (std::size_t c = 0; c < k_; ++c) {
    log_weights_[c] = params.weights[c] > 0.0 ? std::log(params.weights[c])
                                              : -std::numeric_limits<double>::infinity();
    std::copy(params.means[c].begin(), params.means[c].end(), means_.begin() + c * d_);
    repairs_ += cholesky_with_repair(params.covariances[c], d_, chol_.data() + c * d_ * d_);
    double log_det_half = 0.0;
    for (std::size_t i = 0; i < d_; ++i)
      log_det_half += std::log(chol_[c * d_ * d_ + i * d_ + i]);
    log_norm_[c] = -0.5 * static_cast<double>(d_) * kLog2Pi - log_det_half;
  }
}

void GmmDensity::component_log_pdfs(std::span<const double> x, std::span<double> out,
                                    std::span<double> scratch) const {
  if (x.size() != d_) throw ValidationError("point has wrong dimension for mixture");
  for (std::size_t c = 0; c < k_; ++c) {
    const double* mu = means_.data() + c * d_;
    const double* L = chol_.data() + c * d_ * d_;
    // forward substitution: L y = x - mu
    double quad = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      double v = x[i] - mu[i];
      const double* Li = L + i * d_;
      for (std::size_t j = 0; j < i; ++j) v -= Li[j] * scratch[j];
      const double y = v / Li[i];
      scratch[i] = y;
      quad += y * y;
    }
    out[c] = log_norm_[c] - 0.5 * quad;
  }
}

std::vector<double> GmmDensity::component_log_pdfs(std::span<const double> x) const {
  std::vector<double> out(k_), scratch(d_);
  component_log_pdfs(x, out, scratch);
  return out;
}

double GmmDensity::log_pdf(std::span<const double> x) const {
  std::vector<double> lp(k_), scratch(d_);
  component_log_pdfs(x, lp, scratch);
  for (std::size_t c = 0; c < k_; ++c) lp[c] += log_weights_[c];
  return log_sum_exp(lp);
}

std::size_t GmmDensity::assign(std::span<const double> x) const {
  std::vector<double> lp(k_), scratch(d_);
  component_log_pdfs(x, lp, scratch);
  std::size_t best = 0;
  double best_v = lp[0] + log_weights_[0];
  for (std::size_t c = 1; c < k_; ++c) {
    const double v = lp[c] + log_weights_[c];
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

std::vector<double> component_log_pdfs(const GmmParams& params, std::span<const double> x) {
  return GmmDensity(params).component_log_pdfs(x);
}

double log_pdf(const GmmParams& params, std::span<const double> x) {
  return GmmDensity(params).log_pdf(x);
}

std::size_t assign(const GmmParams& params, std::span<const double> x) {
  return GmmDensity(params).assign(x);
}

GmmParams init_kmeans(const std::vector<std::vector<double>>& data, std::size_t k,
                      double subset_fraction, std::uint64_t seed, int workers) {
  if (data.empty()) throw TrainingError("k-means: no data");
  if (k == 0) throw TrainingError("k-means: k must be positive");
  if (k > data.size()) throw TrainingError("k-means: more components than rows");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
    throw TrainingError("k-means: subset_fraction must lie in (0, 1]");
  const std::size_t n = data.size();
  const std::size_t d = data[0].size();

  std::size_t m = static_cast<std::size_t>(
      std::llround(subset_fraction * static_cast<double>(n)));
  m = std::clamp<std::size_t>(m, k, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(m);

  std::vector<double> centers(k * d);
  for (std::size_t c = 0; c < k; ++c)
    std::copy(data[idx[c]].begin(), data[idx[c]].end(), centers.begin() + c * d);

  std::vector<std::size_t> assign_of(m, 0);
  auto sqdist = [&](const std::vector<double>& row, const double* ctr) {
    double s = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = row[f] - ctr[f];
      s += dv * dv;
    }
    return s;
  };

  constexpr std::size_t kMaxIter = 25;
  for (std::size_t iter = 0; iter < kMaxIter; ++iter) {
    std::size_t changed = map_reduce_chunks<std::size_t>(
        m, workers, 0,
        [&](std::size_t b, std::size_t e) {
          std::size_t ch = 0;
          for (std::size_t i = b; i < e; ++i) {
            const auto& row = data[idx[i]];
            std::size_t best = 0;
            double best_d = sqdist(row, centers.data());
            for (std::size_t c = 1; c < k; ++c) {
              const double dd = sqdist(row, centers.data() + c * d);
              if (dd < best_d) {
                best_d = dd;
                best = c;
              }
            }
            if (assign_of[i] != best) {
              assign_of[i] = best;
              ++ch;
            }
          }
          return ch;
        },
        [](std::size_t a, std::size_t b) { return a + b; });

    std::vector<double> sums(k * d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& row = data[idx[i]];
      double* s = sums.data() + assign_of[i] * d;
      for (std::size_t f = 0; f < d; ++f) s[f] += row[f];
      ++counts[assign_of[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed an empty cluster to the point farthest from its center
        std::size_t far_i = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double dd = sqdist(data[idx[i]], centers.data() + assign_of[i] * d);
          if (dd > far_d) {
            far_d = dd;
            far_i = i;
          }
        }
        std::copy(data[idx[far_i]].begin(), data[idx[far_i]].end(),
                  centers.begin() + c * d);
        assign_of[far_i] = c;
        ++changed;
        continue;
      }
      for (std::size_t f = 0; f < d; ++f)
        centers[c * d + f] = sums[c * d + f] / static_cast<double>(counts[c]);
    }
    if (changed == 0 && iter > 0) break;
  }

  const std::vector<double> fvar = feature_variances(data);
  GmmParams out;
  out.weights.assign(k, 0.0);
  out.means.assign(k, std::vector<double>(d, 0.0));
  out.covariances.assign(k, std::vector<std::vector<double>>(d, std::vector<double>(d, 0.0)));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < m; ++i) ++counts[assign_of[i]];
  for (std::size_t c = 0; c < k; ++c) {
    out.weights[c] = static_cast<double>(counts[c]) / static_cast<double>(m);
    for (std::size_t f = 0; f < d; ++f) out.means[c][f] = centers[c * d + f];
  }
  // per-cluster covariance of subset members, ridged on the diagonal
  std::vector<std::vector<double>> cov(k, std::vector<double>(d * d, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = data[idx[i]];
    const std::size_t c = assign_of[i];
    for (std::size_t a = 0; a < d; ++a) {
      const double va = row[a] - out.means[c][a];
      for (std::size_t b2 = a; b2 < d; ++b2)
        cov[c][a * d + b2] += va * (row[b2] - out.means[c][b2]);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double denom = counts[c] > 0 ? static_cast<double>(counts[c]) : 1.0;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b2 = a; b2 < d; ++b2) {
        const double v = cov[c][a * d + b2] / denom;
        out.covariances[c][a][b2] = v;
        out.covariances[c][b2][a] = v;
      }
    for (std::size_t f = 0; f < d; ++f) {
      out.covariances[c][f][f] += 1e-6 * fvar[f];
      if (counts[c] < 2 && out.covariances[c][f][f] <= 0.0)
        out.covariances[c][f][f] = std::max(fvar[f], 1e-6);
    }
  }
  // guard against an all-in-one-cluster start producing zero weights
  double wsum = 0.0;
  for (double& w : out.weights) {
    w = std::max(w, 1e-12);
    wsum += w;
  }
  for (double& w : out.weights) w /= wsum;
  return out;
}

EmTrace fit_em(const std::vector<std::vector<double>>& data, GmmParams init,
               std::size_t max_iter, double tol, int workers) {
  if (data.empty()) throw TrainingError("EM: no data");
  init.validate();
  const std::size_t n = data.size();
  const std::size_t d = data[0].size();
  const std::size_t k = init.components();
  if (init.dim() != d) throw TrainingError("EM: dimension mismatch with init");
  if (!(tol >= 0.0)) throw TrainingError("EM: tol must be non-negative");

  const std::vector<double> fvar = feature_variances(data);
  std::vector<double> ridge(d);
  for (std::size_t f = 0; f < d; ++f) ridge[f] = 1e-6 * fvar[f];

  EmTrace trace;
  trace.params = std::move(init);

  struct Acc {
    double ll = 0.0;
    std::vector<double> nc, mean, cov;  // K, K*d, K*d*d
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    GmmDensity density(trace.params);
    trace.ridge_repairs += density.repairs();

    Acc zero;
    zero.nc.assign(k, 0.0);
    zero.mean.assign(k * d, 0.0);
    zero.cov.assign(k * d * d, 0.0);
    Acc acc = map_reduce_chunks<Acc>(
        n, workers, zero,
        [&](std::size_t b, std::size_t e) {
          Acc a;
          a.nc.assign(k, 0.0);
          a.mean.assign(k * d, 0.0);
          a.cov.assign(k * d * d, 0.0);
          std::vector<double> lp(k), scratch(d);
          for (std::size_t i = b; i < e; ++i) {
            density.component_log_pdfs(data[i], lp, scratch);
            for (std::size_t c = 0; c < k; ++c) lp[c] += density.log_weight(c);
            const double lse = log_sum_exp(lp);
            a.ll += lse;
            for (std::size_t c = 0; c < k; ++c) {
              const double r = std::exp(lp[c] - lse);
              if (r <= 0.0) continue;
              a.nc[c] += r;
              double* mc = a.mean.data() + c * d;
              double* cc = a.cov.data() + c * d * d;
              const auto& row = data[i];
              for (std::size_t f = 0; f < d; ++f) mc[f] += r * row[f];
              for (std::size_t f = 0; f < d; ++f) {
                const double rf = r * row[f];
                for (std::size_t g = f; g < d; ++g) cc[f * d + g] += rf * row[g];
              }
            }
          }
          return a;
        },
        [&](Acc lhs, const Acc& rhs) {
          lhs.ll += rhs.ll;
          for (std::size_t i = 0; i < lhs.nc.size(); ++i) lhs.nc[i] += rhs.nc[i];
          for (std::size_t i = 0; i < lhs.mean.size(); ++i) lhs.mean[i] += rhs.mean[i];
          for (std::size_t i = 0; i < lhs.cov.size(); ++i) lhs.cov[i] += rhs.cov[i];
          return lhs;
        });

    trace.log_likelihood.push_back(acc.ll);

    // M-step
    for (std::size_t c = 0; c < k; ++c) {
      const double nc = acc.nc[c];
      if (nc < 1e-10) {
        trace.params.weights[c] = 1e-12;  // collapsed component keeps old shape
        continue;
      }
      trace.params.weights[c] = nc / static_cast<double>(n);
      for (std::size_t f = 0; f < d; ++f)
        trace.params.means[c][f] = acc.mean[c * d + f] / nc;
      for (std::size_t f = 0; f < d; ++f)
        for (std::size_t g = f; g < d; ++g) {
          double v = acc.cov[c * d * d + f * d + g] / nc -
                     trace.params.means[c][f] * trace.params.means[c][g];
          if (f == g) v += ridge[f];
          trace.params.covariances[c][f][g] = v;
          trace.params.covariances[c][g][f] = v;
        }
    }
    double wsum = 0.0;
    for (double w : trace.params.weights) wsum += w;
    for (double& w : trace.params.weights) w /= wsum;

    if (trace.log_likelihood.size() >= 2) {
      const double prev = trace.log_likelihood[trace.log_likelihood.size() - 2];
      const double cur = trace.log_likelihood.back();
      if (std::abs(cur - prev) <= tol * (1.0 + std::abs(cur))) break;
    }
  }
  return trace;
}

}  // namespace eadmnc
