// Null law of the sample autocovariance: quadratic-form matrices, the
// eigenvalue pipeline, and the generalized chi-squared distribution
// (sampling, characteristic function, CDF by Fourier inversion, quantiles).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "fbmtest/errors.hpp"
#include "fbmtest/model_cov.hpp"
#include "fbmtest/rng.hpp"

namespace fbmtest {

// ---------------------------------------------------------------------------
// Quadratic-form matrices and the statistic
// ---------------------------------------------------------------------------

/// Symmetric matrix A_k with r_hat(k) = x^T A_k x.
struct QFMatrix {
  std::size_t n = 0;
  std::size_t lag = 0;
  Eigen::MatrixXd entries;

  /// Value on the nonzero (off-)diagonals.
  double coefficient() const {
    return lag == 0 ? 1.0 / static_cast<double>(n) : 0.5 / static_cast<double>(n - lag);
  }
};

inline QFMatrix build_qf_matrix(std::size_t n, std::size_t k) {
  check_lag(n, k);
  QFMatrix a{n, k, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  const double c = a.coefficient();
  const auto kk = static_cast<Eigen::Index>(k);
  for (Eigen::Index i = 0; i + kk < static_cast<Eigen::Index>(n); ++i) {
    a.entries(i, i + kk) = c;
    a.entries(i + kk, i) = c;
  }
  return a;
}

/// Sample autocovariance without mean subtraction,
/// r_hat(k) = sum_{i<n-k} x_i x_{i+k} / (n-k).
inline double acvf_statistic(std::span<const double> x, std::size_t k) {
  check_lag(x.size(), k);
  const std::size_t m = x.size() - k;
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) acc += x[i] * x[i + k];
  return acc / static_cast<double>(m);
}

// ---------------------------------------------------------------------------
// Eigenvalue pipeline
// ---------------------------------------------------------------------------

struct QFWeights {
  std::vector<double> lambdas;  // sorted descending
  std::size_t n = 0;
  std::size_t lag = 0;
  std::optional<ModelSpec> model;

  double sum() const {
    double s = 0.0;
    for (double l : lambdas) s += l;
    return s;
  }
};

inline constexpr double kPsdClipTolerance = 1e-10;
inline constexpr double kNegativeMassTolerance = 1e-8;

/// Symmetric square root V D^{1/2} V^T of a covariance matrix. Eigenvalues
/// below zero are clipped; a negative spectral mass above 1e-8 of the total
/// is reported as a numerical error.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const Eigen::VectorXd d = es.eigenvalues();
  double neg = 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    total += std::abs(d(i));
    if (d(i) < 0.0) neg += -d(i);
  }
  if (total == 0.0) return Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  if (neg > kNegativeMassTolerance * total) {
    throw NumericalError("covariance has relative negative eigenvalue mass " + std::to_string(neg / total));
  }
  const Eigen::VectorXd root = d.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Eigenvalues of cov^{1/2} A_k cov^{1/2} for an arbitrary Gaussian
/// covariance, sorted descending.
inline std::vector<double> qf_weights(const Eigen::MatrixXd& cov, std::size_t k) {
  const Eigen::Index n = cov.rows();
  if (n == 0 || cov.cols() != n) throw DimensionError("covariance must be a nonempty square matrix");
  check_lag(static_cast<std::size_t>(n), k);
  const Eigen::MatrixXd root = symmetric_sqrt(cov);
  // root * A_k, using that column j of A_k has entries only at rows j +- k.
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd ra(n, n);
  if (k == 0) {
    ra = root / static_cast<double>(n);
  } else {
    const double c = 0.5 / static_cast<double>(n - kk);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j - kk >= 0 && j + kk < n) {
        ra.col(j) = c * (root.col(j - kk) + root.col(j + kk));
      } else if (j - kk >= 0) {
        ra.col(j) = c * root.col(j - kk);
      } else if (j + kk < n) {
        ra.col(j) = c * root.col(j + kk);
      } else {
        ra.col(j).setZero();
      }
    }
  }
  Eigen::MatrixXd product = ra * root;
  product = 0.5 * (product + product.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(product, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the quadratic form failed");
  std::vector<double> lambdas(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  return lambdas;
}

/// Weights of the generalized chi-squared null law of r_hat(k) for n
/// increments of noisy FBM.
inline QFWeights null_weights(std::size_t n, std::size_t k, const ModelSpec& model) {
  model.validate();
  check_lag(n, k);
  const CovMatrix cov = covariance_matrix(n, model);
  return QFWeights{qf_weights(cov.entries, k), n, k, model};
}

// ---------------------------------------------------------------------------
// Generalized chi-squared law
// ---------------------------------------------------------------------------

enum class InversionRoute { Auto, Grid, Fourier };

struct InversionSettings {
  // Weights with |lambda| < drop_ratio * max|lambda| are ignored by the inversion.
  double drop_ratio = 1e-14;
  // Bound on the truncated tail of the inversion integral (probability units).
  double tail_tolerance = 1e-12;
  // Probability mass allowed outside the precomputed support bracket.
  double support_epsilon = 1e-13;
  // Above this many quadrature nodes the grid route gives way to Ooura.
  std::size_t max_grid_nodes = 600000;
  // Absolute CDF accuracy demanded from the Ooura route.
  double fourier_tolerance = 1e-8;
  InversionRoute route = InversionRoute::Auto;
};

/// Law of sum_j lambda_j U_j^2 with U_j i.i.d. standard normal.
///
/// The CDF uses the Gil-Pelaez inversion in Imhof's real form
///   F(x) = 1/2 - (1/pi) int_0^inf rho(t) sin(theta(t) - t x) / t dt,
///   rho(t) = prod (1 + 4 t^2 lambda_j^2)^{-1/4},
///   theta(t) = (1/2) sum atan(2 t lambda_j).
/// When rho decays quickly (many weights) the integrand's t-dependent part
/// is tabulated once on a Gauss-Legendre grid and every CDF evaluation is a
/// single weighted sum. Few-weight laws, whose integrand decays only
/// algebraically, go through Ooura's double-exponential Fourier quadrature.
/// Outside a Chernoff bracket [lo, hi] holding all but 2*support_epsilon of
/// the mass, the CDF is 0 or 1.
///
/// Immutable after construction; safe to share across threads.
class GChi2Law {
 public:
  explicit GChi2Law(std::vector<double> weights, InversionSettings settings = {})
      : weights_(std::move(weights)), settings_(settings) {
    if (weights_.empty()) throw DimensionError("generalized chi-squared law needs at least one weight");
    for (double w : weights_) {
      if (!std::isfinite(w)) throw DomainError("non-finite weight");
      mean_ += w;
      variance_ += 2.0 * w * w;
    }
    double max_abs = 0.0;
    for (double w : weights_) max_abs = std::max(max_abs, std::abs(w));
    for (double w : weights_) {
      if (std::abs(w) >= settings_.drop_ratio * max_abs && w != 0.0) active_.push_back(w);
    }
    if (active_.empty()) return;  // degenerate at zero
    max_abs_ = max_abs;
    for (double w : active_) {
      sum_abs_ += std::abs(w);
      max_pos_ = std::max(max_pos_, w);
      min_neg_ = std::min(min_neg_, w);
    }
    hi_ = upper_bracket(active_, settings_.support_epsilon);
    std::vector<double> neg(active_.size());
    std::transform(active_.begin(), active_.end(), neg.begin(), [](double w) { return -w; });
    lo_ = -upper_bracket(neg, settings_.support_epsilon);
    choose_route();
  }

  explicit GChi2Law(const QFWeights& weights, InversionSettings settings = {})
      : GChi2Law(weights.lambdas, settings) {}

  const std::vector<double>& weights() const { return weights_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  double stddev() const { return std::sqrt(variance_); }
  bool degenerate() const { return active_.empty(); }
  bool uses_grid() const { return !grid_t_.empty(); }
  std::size_t grid_nodes() const { return grid_t_.size(); }
  /// P(Q < lo) and P(Q > hi) are each below the support epsilon.
  std::pair<double, double> support_bracket() const { return {lo_, hi_}; }
  const InversionSettings& settings() const { return settings_; }

  /// phi(t) = prod_j (1 - 2 i t lambda_j)^{-1/2}, principal branches,
  /// accumulated as a sum of logarithms.
  std::complex<double> chf(double t) const {
    if (!std::isfinite(t)) throw DomainError("chf: t must be finite");
    std::complex<double> log_phi = 0.0;
    for (double w : weights_) log_phi += std::log(std::complex<double>(1.0, -2.0 * t * w));
    return std::exp(-0.5 * log_phi);
  }

  double cdf(double x) const {
    if (!std::isfinite(x)) throw DomainError("cdf: x must be finite");
    if (active_.empty()) return x < 0.0 ? 0.0 : 1.0;
    if (min_neg_ >= 0.0 && x <= 0.0) return 0.0;
    if (max_pos_ <= 0.0 && x >= 0.0) return 1.0;
    if (x < lo_) return 0.0;
    if (x > hi_) return 1.0;
    const double integral = uses_grid() ? grid_integral(x) : fourier_integral(x);
    return std::clamp(0.5 - integral / std::numbers::pi, 0.0, 1.0);
  }

  /// x with F(x) = p, found by bracketing from mean +- 12 sd (doubling the
  /// half-width until F straddles p) and TOMS 748 on the bracket.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in (0,1)");
    if (active_.empty()) return 0.0;
    const double sd = stddev();
    double half = 12.0 * sd;
    double a = mean_ - half;
    double b = mean_ + half;
    double fa = cdf(a) - p;
    double fb = cdf(b) - p;
    for (int it = 0; fa > 0.0 || fb < 0.0; ++it) {
      if (it > 64) throw ConvergenceError("quantile: could not bracket p = " + std::to_string(p));
      half *= 2.0;
      a = mean_ - half;
      b = mean_ + half;
      fa = cdf(a) - p;
      fb = cdf(b) - p;
    }
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    const double xtol = 1e-14 * std::max(sd, std::abs(mean_));
    auto f = [&](double x) { return cdf(x) - p; };
    auto tol = [xtol](double u, double v) { return std::abs(v - u) <= xtol; };
    std::uintmax_t max_iter = 200;
    const auto [l, r] = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, max_iter);
    if (max_iter >= 200) throw ConvergenceError("quantile: root search did not converge");
    return 0.5 * (l + r);
  }

  /// One draw of sum_j lambda_j Z_j^2.
  double draw(Engine& rng) const {
    std::normal_distribution<double> normal;
    double q = 0.0;
    for (double w : weights_) {
      const double z = normal(rng);
      q += w * z * z;
    }
    return q;
  }

 private:
  // Cumulant generating function K(s) = -1/2 sum log(1 - 2 s lambda).
  static double cgf(const std::vector<double>& w, double s) {
    double acc = 0.0;
    for (double l : w) acc += std::log1p(-2.0 * s * l);
    return -0.5 * acc;
  }

  // Smallest u (to bisection accuracy) whose Chernoff bound
  // inf_s exp(K(s) - s u) on P(Q >= u) is below eps.
  static double upper_bracket(const std::vector<double>& w, double eps) {
    double lmax = 0.0;
    double mean = 0.0;
    double var = 0.0;
    for (double l : w) {
      lmax = std::max(lmax, l);
      mean += l;
      var += 2.0 * l * l;
    }
    if (lmax <= 0.0) return 0.0;
    const double smax = 0.5 / lmax;
    const double log_eps = std::log(eps);
    auto log_bound = [&](double u) {
      auto obj = [&](double s) { return cgf(w, s) - s * u; };
      const auto res = boost::math::tools::brent_find_minima(obj, 0.0, smax * (1.0 - 1e-12), 40);
      return std::min(0.0, res.second);
    };
    const double sd = std::sqrt(var);
    double lo = mean;
    double step = std::max(sd, lmax);
    double hi = mean + step;
    while (log_bound(hi) > log_eps) {
      lo = hi;
      step *= 2.0;
      hi = mean + step;
    }
    for (int it = 0; it < 60 && hi - lo > 1e-10 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (log_bound(mid) > log_eps ? lo : hi) = mid;
    }
    return hi;
  }

  double log_rho(double t) const {
    double acc = 0.0;
    for (double l : active_) acc += std::log1p(4.0 * t * t * l * l);
    return -0.25 * acc;
  }

  double theta(double t) const {
    double acc = 0.0;
    for (double l : active_) acc += std::atan(2.0 * t * l);
    return 0.5 * acc;
  }

  // -d log rho / d log t, nondecreasing in t.
  double decay_exponent(double t) const {
    double acc = 0.0;
    for (double l : active_) {
      const double v = 4.0 * t * t * l * l;
      acc += v / (1.0 + v);
    }
    return 0.5 * acc;
  }

  void choose_route() {
    if (settings_.route == InversionRoute::Fourier) return;
    const double scale = 0.5 / max_abs_;  // distance of the nearest branch point of rho
    const double omega = sum_abs_ + std::max(std::abs(lo_), std::abs(hi_));
    const double max_width = 2.0 * std::numbers::pi / omega;
    constexpr std::size_t kPoints = 20;

    // Truncation point: tail of int rho/t beyond T is at most rho(T)/p(T).
    double t_end = scale;
    const double max_t = static_cast<double>(settings_.max_grid_nodes / kPoints) * max_width + 64.0 * scale;
    while (true) {
      const double p = decay_exponent(t_end);
      if (std::exp(log_rho(t_end)) / (p * std::numbers::pi) <= settings_.tail_tolerance) break;
      t_end *= 1.5;
      if (t_end > max_t) {
        if (settings_.route == InversionRoute::Grid) {
          throw ConvergenceError("grid inversion: integrand does not decay within the node budget");
        }
        return;
      }
    }

    std::vector<double> edges{0.0};
    while (edges.back() < t_end) {
      const double t0 = edges.back();
      const double w = std::min(max_width, 0.5 * (t0 + scale));
      edges.push_back(std::min(t_end, t0 + w));
      if (edges.size() * kPoints > settings_.max_grid_nodes) {
        if (settings_.route == InversionRoute::Grid) {
          throw ConvergenceError("grid inversion: node budget exceeded");
        }
        return;
      }
    }

    using Rule = boost::math::quadrature::gauss<double, kPoints>;
    const auto& absc = Rule::abscissa();
    const auto& wts = Rule::weights();
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double c = 0.5 * (edges[p] + edges[p + 1]);
      const double h = 0.5 * (edges[p + 1] - edges[p]);
      for (std::size_t i = 0; i < absc.size(); ++i) {
        // absc holds the nonnegative half of a symmetric rule.
        const int reps = absc[i] == 0.0 ? 1 : 2;
        for (int sgn = 0; sgn < reps; ++sgn) {
          const double t = c + (sgn == 0 ? 1.0 : -1.0) * h * absc[i];
          grid_t_.push_back(t);
          grid_amp_.push_back(h * wts[i] * std::exp(log_rho(t)) / t);
          grid_theta_.push_back(theta(t));
        }
      }
    }
  }

  double grid_integral(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid_t_.size(); ++i) {
      acc += grid_amp_[i] * std::sin(grid_theta_[i] - grid_t_[i] * x);
    }
    return acc;
  }

  double fourier_integral(double x) const {
    using boost::math::quadrature::exp_sinh;
    using boost::math::quadrature::ooura_fourier_cos;
    using boost::math::quadrature::ooura_fourier_sin;
    // rho sin(theta)/t and (rho cos(theta) - 1)/t; the subtracted 1/t term
    // integrates against sin(w t) to pi/2 in closed form.
    auto f1 = [this](double t) {
      if (t == 0.0) return mean_;
      return std::exp(log_rho(t)) * std::sin(theta(t)) / t;
    };
    auto f2 = [this](double t) {
      if (t == 0.0) return 0.0;
      const double lr = log_rho(t);
      const double th = theta(t);
      // rho cos(theta) - 1 = expm1(log rho) cos(theta) - 2 sin^2(theta/2)
      const double s = std::sin(0.5 * th);
      return (std::expm1(lr) * std::cos(th) - 2.0 * s * s) / t;
    };
    const double tol = settings_.fourier_tolerance;
    if (x == 0.0) {
      thread_local exp_sinh<double> es;
      double err = 0.0;
      const double v = es.integrate(f1, 1e-12, &err);
      if (!(err <= tol * std::numbers::pi)) throw ConvergenceError("cdf: exp-sinh quadrature did not converge");
      return v;
    }
    const double omega = std::abs(x);
    thread_local ooura_fourier_sin<double> sin_rule(1e-11);
    thread_local ooura_fourier_cos<double> cos_rule(1e-11);
    const auto [c, c_err] = cos_rule.integrate(f1, omega);
    const auto [s, s_err] = sin_rule.integrate(f2, omega);
    // Ooura reports relative errors, which come back NaN when the integral is
    // zero or tiny (theta == 0 for sign-symmetric weights, far tails). Then a
    // coarser rule is run and the disagreement serves as the error.
    thread_local ooura_fourier_sin<double> sin_coarse(1e-9);
    thread_local ooura_fourier_cos<double> cos_coarse(1e-9);
    auto absolute = [omega](double v, double rel, auto& coarse, auto& f) {
      if (std::isfinite(rel)) return rel * std::abs(v);
      return std::abs(coarse.integrate(f, omega).first - v);
    };
    const double abs_err = absolute(c, c_err, cos_coarse, f1) + absolute(s, s_err, sin_coarse, f2);
    if (!std::isfinite(c) || !std::isfinite(s) || !(abs_err <= tol * std::numbers::pi)) {
      throw ConvergenceError("cdf: Fourier quadrature did not reach tolerance at x = " + std::to_string(x));
    }
    const double half_pi = 0.5 * std::numbers::pi;
    return x > 0.0 ? c - (s + half_pi) : c + (s + half_pi);
  }

  std::vector<double> weights_;
  std::vector<double> active_;
  InversionSettings settings_;
  double mean_ = 0.0;
  double variance_ = 0.0;
  double max_abs_ = 0.0;
  double sum_abs_ = 0.0;
  double max_pos_ = 0.0;
  double min_neg_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> grid_t_;
  std::vector<double> grid_amp_;
  std::vector<double> grid_theta_;
};

// ---------------------------------------------------------------------------
// Free-function interface
// ---------------------------------------------------------------------------

/// count i.i.d. draws, deterministic in (seed, stream).
inline std::vector<double> gchi2_sample(const GChi2Law& law, std::size_t count, std::uint64_t seed,
                                        std::uint64_t stream = 0) {
  if (count == 0) throw DimensionError("gchi2_sample: count must be >= 1");
  Engine rng = make_stream(seed, {stream});
  std::vector<double> out(count);
  for (auto& q : out) q = law.draw(rng);
  return out;
}

inline std::complex<double> gchi2_chf(const GChi2Law& law, double t) { return law.chf(t); }
inline double gchi2_cdf(const GChi2Law& law, double x) { return law.cdf(x); }
inline double gchi2_quantile(const GChi2Law& law, double p) { return law.quantile(p); }

/// Empirical characteristic function mean(exp(i t s)) of a sample.
inline std::complex<double> empirical_chf(std::span<const double> samples, double t) {
  if (samples.empty()) throw DimensionError("empirical_chf: empty sample");
  double re = 0.0;
  double im = 0.0;
  for (double s : samples) {
    re += std::cos(t * s);
    im += std::sin(t * s);
  }
  const auto m = static_cast<double>(samples.size());
  return {re / m, im / m};
}

/// Empirical quantile (inverse empirical CDF) of m simulated draws; the
/// same draws serve every requested probability.
inline std::vector<double> gchi2_mc_quantiles(const GChi2Law& law, std::span<const double> probs,
                                              std::size_t m, std::uint64_t seed) {
  std::vector<double> draws = gchi2_sample(law, m, seed);
  std::sort(draws.begin(), draws.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in (0,1)");
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(m)));
    out.push_back(draws[std::clamp<std::size_t>(idx, 1, m) - 1]);
  }
  return out;
}

}  // namespace fbmtest
