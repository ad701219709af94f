// Closed-form covariance structure of fractional Gaussian noise, noisy
// FBM increments and scaled Brownian motion increments. Unit sampling step.
#pragma once

#include <cmath>
#include <numbers>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "fbmtest/errors.hpp"

namespace fbmtest {

/// Null-model parameters: FBM with Hurst index `hurst` observed through
/// additive white Gaussian noise of standard deviation `sigma`.
struct ModelSpec {
  double hurst = 0.5;
  double sigma = 0.0;

  void validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) {
      throw DomainError("hurst must lie in (0,1), got " + std::to_string(hurst));
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw DomainError("sigma must be finite and >= 0, got " + std::to_string(sigma));
    }
  }
};

/// Scaled Brownian motion B(t^alpha).
struct SbmSpec {
  double alpha = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw DomainError("alpha must be finite and > 0, got " + std::to_string(alpha));
    }
  }
};

/// Autocovariance of unit-lag FBM increments,
/// r(k) = ((k+1)^{2H} + |k-1|^{2H} - 2 k^{2H}) / 2.
inline double fgn_acvf(std::size_t k, double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) {
    throw DomainError("hurst must lie in (0,1), got " + std::to_string(hurst));
  }
  const double two_h = 2.0 * hurst;
  if (k == 0) return 1.0;
  // (2^{2H} - 2)/2 = expm1((2H-1) log 2), exact near H = 1/2
  if (k == 1) return std::expm1((two_h - 1.0) * std::numbers::ln2);
  // k^{2H} [ (1+u)^{2H} + (1-u)^{2H} - 2 ] / 2 with u = 1/k. The bracket is
  // 2 sum_j binom(2H, 2j) u^{2j}; every term carries the factor 2H(2H-1), so
  // no digits are lost to cancellation for H near 1/2 or large k.
  const double kd = static_cast<double>(k);
  const double u2 = 1.0 / (kd * kd);
  double term = 0.5 * two_h * (two_h - 1.0) * u2;
  double sum = term;
  for (int j = 1; j < 200; ++j) {
    const double m = 2.0 * j;
    term *= (two_h - m) * (two_h - m - 1.0) / ((m + 1.0) * (m + 2.0)) * u2;
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return std::pow(kd, two_h) * sum;
}

/// Autocovariance of the increments of B_H(t) + xi(t): the FGN value plus
/// 2 sigma^2 at lag 0 and minus sigma^2 at lag 1.
inline double noisy_increment_acvf(std::size_t k, const ModelSpec& model) {
  model.validate();
  const double r = fgn_acvf(k, model.hurst);
  const double s2 = model.sigma * model.sigma;
  if (k == 0) return r + 2.0 * s2;
  if (k == 1) return r - s2;
  return r;
}

/// Symmetric Toeplitz covariance matrix of n consecutive increments.
struct CovMatrix {
  Eigen::MatrixXd entries;

  std::size_t n() const { return static_cast<std::size_t>(entries.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// Builds a symmetric Toeplitz matrix from its first column.
inline Eigen::MatrixXd toeplitz(const Eigen::VectorXd& column) {
  const Eigen::Index n = column.size();
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = column(std::abs(i - j));
  }
  return m;
}

inline Eigen::VectorXd acvf_column(std::size_t n, const ModelSpec& model) {
  model.validate();
  Eigen::VectorXd col(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    col(static_cast<Eigen::Index>(k)) = noisy_increment_acvf(k, model);
  }
  return col;
}

inline CovMatrix covariance_matrix(std::size_t n, const ModelSpec& model) {
  if (n == 0) throw DimensionError("covariance_matrix: n must be >= 1");
  return CovMatrix{toeplitz(acvf_column(n, model))};
}

/// Covariance of unit-lag increments i and j of B(t^alpha) sampled at
/// integer times: independent, with variance (i+1)^alpha - i^alpha.
inline double sbm_increment_cov(std::size_t i, std::size_t j, const SbmSpec& sbm) {
  sbm.validate();
  if (i != j) return 0.0;
  const double id = static_cast<double>(i);
  if (i == 0) return 1.0;
  // i^alpha ((1+1/i)^alpha - 1)
  return std::pow(id, sbm.alpha) * std::expm1(sbm.alpha * std::log1p(1.0 / id));
}

}  // namespace fbmtest
