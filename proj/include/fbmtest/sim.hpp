// Exact simulators for FGN, noisy-FBM increments and SBM increments.
#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "fbmtest/errors.hpp"
#include "fbmtest/model_cov.hpp"
#include "fbmtest/rng.hpp"

namespace fbmtest {

/// Unit-lag increments of an observed trajectory.
class IncrementSeries {
 public:
  IncrementSeries() = default;
  explicit IncrementSeries(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("increment series contains non-finite value");
    }
  }

  /// Differences a trajectory of n+1 positions into n increments.
  static IncrementSeries from_positions(std::span<const double> positions) {
    if (positions.size() < 2) throw DimensionError("need at least two positions to form an increment");
    std::vector<double> inc(positions.size() - 1);
    for (std::size_t i = 0; i + 1 < positions.size(); ++i) inc[i] = positions[i + 1] - positions[i];
    return IncrementSeries(std::move(inc));
  }

  std::size_t n() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

 private:
  std::vector<double> values_;
};

enum class SimMethod { CirculantEmbedding, CovarianceFactorization };

inline std::string to_string(SimMethod m) {
  return m == SimMethod::CirculantEmbedding ? "circulant-embedding" : "covariance-factorization";
}

inline SimMethod parse_sim_method(const std::string& s) {
  if (s == "circulant-embedding" || s == "circulant") return SimMethod::CirculantEmbedding;
  if (s == "covariance-factorization" || s == "cholesky") return SimMethod::CovarianceFactorization;
  throw std::invalid_argument("unknown simulation method '" + s + "'");
}

struct SimConfig {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  SimMethod method = SimMethod::CirculantEmbedding;
  // Replication index; selects an independent RNG stream for the same seed.
  std::uint64_t replication = 0;

  void validate() const {
    if (n == 0) throw DimensionError("SimConfig: n must be >= 1");
  }
};

/// Symmetric square root of a PSD covariance, eigenvalues in
/// [-1e-10 max, 0) clipped to zero.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of covariance failed");
  const Eigen::VectorXd d = es.eigenvalues();
  const double scale = d.cwiseAbs().maxCoeff();
  if (d.minCoeff() < -1e-10 * scale) {
    throw NumericalError("covariance matrix is not positive semidefinite");
  }
  const Eigen::VectorXd root = d.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Exact sampler of a length-n stationary Gaussian sequence with given
/// autocovariance, either by circulant embedding (Davies-Harte) or by
/// factorizing the full covariance matrix. Construction does the expensive
/// spectral or Cholesky work once; generate() is const and thread-safe.
///
/// The circulant has size 2(n-1) and uses the supplied lags 0..n-1, so
/// choosing n-1 as a power of two keeps the FFT on its fast path.
class StationaryGaussianGenerator {
 public:
  StationaryGaussianGenerator(const Eigen::VectorXd& acvf, SimMethod method)
      : n_(static_cast<std::size_t>(acvf.size())), method_(method) {
    if (n_ == 0) throw DimensionError("generator length must be >= 1");
    if (method_ == SimMethod::CovarianceFactorization) {
      const Eigen::MatrixXd cov = toeplitz(acvf);
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        lower_ = true;
      } else {
        factor_ = covariance_factor(cov);
        lower_ = false;
      }
    } else if (n_ == 1) {
      sqrt_eig_ = {std::sqrt(acvf(0))};
    } else {
      init_circulant(acvf);
    }
  }

  std::size_t n() const { return n_; }
  SimMethod method() const { return method_; }

  void generate(Engine& rng, std::span<double> out) const {
    std::normal_distribution<double> normal;
    if (method_ == SimMethod::CovarianceFactorization) {
      Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
      const Eigen::VectorXd x =
          lower_ ? Eigen::VectorXd(factor_.triangularView<Eigen::Lower>() * z) : Eigen::VectorXd(factor_ * z);
      for (std::size_t i = 0; i < n_; ++i) out[i] = x(static_cast<Eigen::Index>(i));
      return;
    }
    if (n_ == 1) {
      out[0] = sqrt_eig_[0] * normal(rng);
      return;
    }
    const std::size_t m = sqrt_eig_.size();
    thread_local Eigen::FFT<double> fft;
    thread_local std::vector<std::complex<double>> w, y;
    w.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      w[j] = sqrt_eig_[j] * std::complex<double>(re, im);
    }
    fft.fwd(y, w);
    // Real and imaginary parts are two independent samples; keep the real one.
    for (std::size_t i = 0; i < n_; ++i) out[i] = y[i].real();
  }

  std::vector<double> generate(Engine& rng) const {
    std::vector<double> out(n_);
    generate(rng, out);
    return out;
  }

 private:
  void init_circulant(const Eigen::VectorXd& acvf) {
    const std::size_t half = n_ - 1;
    const std::size_t m = 2 * half;
    std::vector<std::complex<double>> c(m), spec;
    for (std::size_t j = 0; j <= half; ++j) c[j] = acvf(static_cast<Eigen::Index>(j));
    for (std::size_t j = half + 1; j < m; ++j) c[j] = acvf(static_cast<Eigen::Index>(m - j));
    Eigen::FFT<double> fft;
    fft.fwd(spec, c);
    double max_eig = 0.0;
    double min_eig = 0.0;
    for (const auto& s : spec) {
      max_eig = std::max(max_eig, s.real());
      min_eig = std::min(min_eig, s.real());
    }
    if (min_eig < -1e-10 * max_eig) {
      throw EmbeddingFailure("circulant embedding has negative eigenvalue " + std::to_string(min_eig) +
                             "; retry with covariance-factorization");
    }
    sqrt_eig_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      // w_j = sqrt(lambda_j / m) (a + ib): Re and Im of the FFT each have covariance c.
      sqrt_eig_[j] = std::sqrt(std::max(spec[j].real(), 0.0) / static_cast<double>(m));
    }
  }

  std::size_t n_;
  SimMethod method_;
  std::vector<double> sqrt_eig_;
  Eigen::MatrixXd factor_;
  bool lower_ = true;
};

/// FGN autocovariance at lags 0..len-1.
inline Eigen::VectorXd fgn_acvf_column(std::size_t len, double hurst) {
  Eigen::VectorXd col(static_cast<Eigen::Index>(len));
  for (std::size_t k = 0; k < len; ++k) col(static_cast<Eigen::Index>(k)) = fgn_acvf(k, hurst);
  return col;
}

class FgnGenerator {
 public:
  FgnGenerator(std::size_t n, double hurst, SimMethod method = SimMethod::CirculantEmbedding)
      : gen_(column(n, hurst, method), method), n_(n) {}

  std::size_t n() const { return n_; }

  void generate(Engine& rng, std::span<double> out) const {
    if (gen_.n() == n_) {
      gen_.generate(rng, out);
      return;
    }
    thread_local std::vector<double> buf;
    buf.resize(gen_.n());
    gen_.generate(rng, buf);
    std::copy_n(buf.begin(), n_, out.begin());
  }

 private:
  // For circulant embedding, simulate a stretch of length 2^p + 1 >= n so the
  // FFT size is a power of two, then truncate.
  static Eigen::VectorXd column(std::size_t n, double hurst, SimMethod method) {
    if (n == 0) throw DimensionError("FGN length must be >= 1");
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("hurst must lie in (0,1)");
    if (method == SimMethod::CovarianceFactorization || n == 1) return fgn_acvf_column(n, hurst);
    const std::size_t half = std::bit_ceil(n - 1);
    return fgn_acvf_column(half + 1, hurst);
  }

  StationaryGaussianGenerator gen_;
  std::size_t n_;
};

/// Increments of B_H(t) + xi(t): FGN plus the first difference of n+1
/// i.i.d. N(0, sigma^2) observation errors. The FGN part is drawn first from
/// the stream, so sigma = 0 reproduces the pure FGN sample bit for bit.
class NoisyFbmGenerator {
 public:
  NoisyFbmGenerator(std::size_t n, const ModelSpec& model,
                    SimMethod method = SimMethod::CirculantEmbedding)
      : fgn_((model.validate(), n), model.hurst, method), sigma_(model.sigma) {}

  std::size_t n() const { return fgn_.n(); }

  void generate(Engine& rng, std::span<double> out) const {
    fgn_.generate(rng, out);
    if (sigma_ == 0.0) return;
    std::normal_distribution<double> normal(0.0, sigma_);
    double prev = normal(rng);
    for (std::size_t i = 0; i < fgn_.n(); ++i) {
      const double next = normal(rng);
      out[i] += next - prev;
      prev = next;
    }
  }

  std::vector<double> generate(Engine& rng) const {
    std::vector<double> out(n());
    generate(rng, out);
    return out;
  }

 private:
  FgnGenerator fgn_;
  double sigma_;
};

class SbmGenerator {
 public:
  SbmGenerator(std::size_t n, const SbmSpec& sbm) {
    sbm.validate();
    if (n == 0) throw DimensionError("SBM length must be >= 1");
    sd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) sd_[i] = std::sqrt(sbm_increment_cov(i, i, sbm));
  }

  std::size_t n() const { return sd_.size(); }

  void generate(Engine& rng, std::span<double> out) const {
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < sd_.size(); ++i) out[i] = sd_[i] * normal(rng);
  }

  std::vector<double> generate(Engine& rng) const {
    std::vector<double> out(n());
    generate(rng, out);
    return out;
  }

 private:
  std::vector<double> sd_;
};

inline IncrementSeries simulate_fgn(const SimConfig& config, double hurst) {
  config.validate();
  FgnGenerator gen(config.n, hurst, config.method);
  Engine rng = make_stream(config.seed, {config.replication});
  std::vector<double> out(config.n);
  gen.generate(rng, out);
  return IncrementSeries(std::move(out));
}

inline IncrementSeries simulate_noisy_fbm_increments(const SimConfig& config, const ModelSpec& model) {
  config.validate();
  NoisyFbmGenerator gen(config.n, model, config.method);
  Engine rng = make_stream(config.seed, {config.replication});
  return IncrementSeries(gen.generate(rng));
}

inline IncrementSeries simulate_sbm_increments(const SimConfig& config, const SbmSpec& sbm) {
  config.validate();
  SbmGenerator gen(config.n, sbm);
  Engine rng = make_stream(config.seed, {config.replication});
  return IncrementSeries(gen.generate(rng));
}

}  // namespace fbmtest
