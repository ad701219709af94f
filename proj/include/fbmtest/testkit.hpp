// Two-sided test of "noisy FBM with (H0, sigma0)" based on r_hat(k), and
// critical-surface sweeps over (H, sigma).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbmtest/errors.hpp"
#include "fbmtest/gchi2.hpp"
#include "fbmtest/model_cov.hpp"
#include "fbmtest/parallel.hpp"
#include "fbmtest/sim.hpp"

namespace fbmtest {

struct QuantileMode {
  enum class Kind { Analytic, MonteCarlo };
  Kind kind = Kind::Analytic;
  std::size_t replications = 10000;  // MC only
  std::uint64_t seed = 0;            // MC only

  static QuantileMode analytic() { return {}; }
  static QuantileMode monte_carlo(std::size_t m, std::uint64_t seed = 0) {
    return {Kind::MonteCarlo, m, seed};
  }
  bool is_analytic() const { return kind == Kind::Analytic; }
  std::string name() const { return is_analytic() ? "analytic" : "monte-carlo"; }
};

struct TestConfig {
  ModelSpec model0;
  std::size_t lag = 1;
  double level = 0.05;
  std::size_t n = 0;
  QuantileMode mode;

  void validate() const {
    model0.validate();
    if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0,1)");
    check_lag(n, lag);
    if (!mode.is_analytic() && mode.replications == 0) {
      throw DomainError("Monte Carlo quantile mode needs at least one replication");
    }
  }
};

/// Closed acceptance interval [lower, upper].
struct CriticalInterval {
  double lower = 0.0;
  double upper = 0.0;

  bool retains(double statistic) const { return statistic >= lower && statistic <= upper; }
  double width() const { return upper - lower; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

struct TestOutcome {
  double statistic = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

/// The null distribution of r_hat(k) for one TestConfig, with its critical
/// interval computed once. evaluate() is const and may be called from many
/// threads on different series.
class PreparedTest {
 public:
  explicit PreparedTest(const TestConfig& cfg)
      : cfg_(cfg), law_(std::make_shared<GChi2Law>((cfg.validate(), null_weights(cfg.n, cfg.lag, cfg.model0)))) {
    const double a = cfg_.level;
    if (cfg_.mode.is_analytic()) {
      interval_ = {law_->quantile(0.5 * a), law_->quantile(1.0 - 0.5 * a)};
    } else {
      mc_draws_ = gchi2_sample(*law_, cfg_.mode.replications, cfg_.mode.seed);
      std::sort(mc_draws_.begin(), mc_draws_.end());
      const std::array<double, 2> probs{0.5 * a, 1.0 - 0.5 * a};
      const auto q = order_statistics(probs);
      interval_ = {q[0], q[1]};
    }
  }

  const TestConfig& config() const { return cfg_; }
  const GChi2Law& law() const { return *law_; }
  const CriticalInterval& interval() const { return interval_; }

  /// Null CDF at x: analytic inversion, or the empirical CDF of the MC draws.
  double null_cdf(double x) const {
    if (cfg_.mode.is_analytic()) return law_->cdf(x);
    const auto it = std::upper_bound(mc_draws_.begin(), mc_draws_.end(), x);
    return static_cast<double>(it - mc_draws_.begin()) / static_cast<double>(mc_draws_.size());
  }

  TestOutcome evaluate_statistic(double statistic) const {
    TestOutcome out;
    out.statistic = statistic;
    out.lower = interval_.lower;
    out.upper = interval_.upper;
    out.reject = !interval_.retains(statistic);
    const double f = null_cdf(statistic);
    out.p_value = std::clamp(2.0 * std::min(f, 1.0 - f), 0.0, 1.0);
    return out;
  }

  TestOutcome evaluate(std::span<const double> increments) const {
    if (increments.size() != cfg_.n) {
      throw LengthMismatch("series has " + std::to_string(increments.size()) + " increments, test expects " +
                           std::to_string(cfg_.n));
    }
    return evaluate_statistic(acvf_statistic(increments, cfg_.lag));
  }

 private:
  std::array<double, 2> order_statistics(const std::array<double, 2>& probs) const {
    std::array<double, 2> out{};
    const std::size_t m = mc_draws_.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const auto idx = static_cast<std::size_t>(std::ceil(probs[i] * static_cast<double>(m)));
      out[i] = mc_draws_[std::clamp<std::size_t>(idx, 1, m) - 1];
    }
    return out;
  }

  TestConfig cfg_;
  std::shared_ptr<const GChi2Law> law_;
  std::vector<double> mc_draws_;
  CriticalInterval interval_;
};

inline TestOutcome run_test(const IncrementSeries& x, const TestConfig& cfg) {
  if (x.n() != cfg.n) {
    throw LengthMismatch("series has " + std::to_string(x.n()) + " increments, test expects " +
                         std::to_string(cfg.n));
  }
  return PreparedTest(cfg).evaluate(x.values());
}

/// r_hat(k) for `replications` independent noisy-FBM paths of length n,
/// path r drawn from stream (seed, r).
inline std::vector<double> simulate_null_statistics(std::size_t n, std::size_t lag, const ModelSpec& model,
                                                    std::size_t replications, std::uint64_t seed,
                                                    SimMethod method = SimMethod::CirculantEmbedding,
                                                    std::size_t threads = 0) {
  check_lag(n, lag);
  const NoisyFbmGenerator gen(n, model, method);
  std::vector<double> stats(replications);
  parallel_for(replications, threads, [&](std::size_t r) {
    Engine rng = make_stream(seed, {r});
    thread_local std::vector<double> x;
    x.resize(n);
    gen.generate(rng, x);
    stats[r] = acvf_statistic(x, lag);
  });
  return stats;
}

// ---------------------------------------------------------------------------
// Critical surfaces
// ---------------------------------------------------------------------------

/// Inclusive arithmetic grid lo, lo+step, ..., hi.
struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.05;

  std::size_t count() const {
    if (step <= 0.0 || hi < lo) return hi == lo ? 1 : 0;
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  }
  // Rounded to 12 decimals so 0.1 + 16 * 0.05 prints as 0.9.
  double at(std::size_t i) const {
    const double v = std::min(hi, lo + step * static_cast<double>(i));
    return std::round(v * 1e12) / 1e12;
  }
  std::vector<double> values() const {
    std::vector<double> v(count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = at(i);
    return v;
  }
};

struct SurfaceSpec {
  std::size_t n = 1000;
  double level = 0.05;
  std::size_t lag = 1;
  GridRange hurst{0.1, 0.9, 0.05};
  GridRange sigma{0.0, 1.0, 0.05};
  QuantileMode mode;
  std::size_t threads = 0;  // 0: all available
};

struct SurfaceNode {
  double hurst = 0.0;
  double sigma = 0.0;
  double q_lower = std::numeric_limits<double>::quiet_NaN();
  double q_upper = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

struct CriticalSurface {
  std::size_t n = 0;
  double level = 0.05;
  std::size_t lag = 1;
  QuantileMode mode;
  std::vector<SurfaceNode> nodes;  // H-major, then sigma
};

/// Quantile pair for one grid node: A_k, Sigma, eigenvalues, quantiles.
inline SurfaceNode compute_surface_node(std::size_t n, double level, std::size_t lag, double hurst,
                                        double sigma, const QuantileMode& mode) {
  SurfaceNode node{hurst, sigma};
  try {
    TestConfig cfg{ModelSpec{hurst, sigma}, lag, level, n, mode};
    const PreparedTest prepared(cfg);
    node.q_lower = prepared.interval().lower;
    node.q_upper = prepared.interval().upper;
  } catch (const std::exception& e) {
    node.error = e.what();
  }
  return node;
}

/// Sweeps the (H, sigma) grid. Per-node failures are recorded on the node.
/// `done` lets a resumed sweep skip nodes already computed: it receives the
/// node's (hurst, sigma) and returns a finished node or nothing.
/// `on_node` is called (serialized) after each freshly computed node.
inline CriticalSurface build_critical_surface(
    const SurfaceSpec& spec,
    const std::function<std::optional<SurfaceNode>(double, double)>& done = {},
    const std::function<void(const SurfaceNode&)>& on_node = {}) {
  if (!(spec.level > 0.0 && spec.level < 1.0)) throw DomainError("level must lie in (0,1)");
  check_lag(spec.n, spec.lag);
  const auto hs = spec.hurst.values();
  const auto ss = spec.sigma.values();
  if (hs.empty() || ss.empty()) throw DimensionError("empty surface grid");
  for (double h : hs) {
    if (!(h > 0.0 && h < 1.0)) throw DomainError("surface H range must lie in (0,1)");
  }
  for (double s : ss) {
    if (!(s >= 0.0)) throw DomainError("surface sigma range must be >= 0");
  }
  CriticalSurface surface{spec.n, spec.level, spec.lag, spec.mode, {}};
  surface.nodes.resize(hs.size() * ss.size());
  std::mutex callback_mutex;
  parallel_for(surface.nodes.size(), spec.threads, [&](std::size_t idx) {
    const double h = hs[idx / ss.size()];
    const double s = ss[idx % ss.size()];
    if (done) {
      if (auto prior = done(h, s)) {
        surface.nodes[idx] = *prior;
        return;
      }
    }
    surface.nodes[idx] = compute_surface_node(spec.n, spec.level, spec.lag, h, s, spec.mode);
    if (on_node) {
      std::lock_guard<std::mutex> lock(callback_mutex);
      on_node(surface.nodes[idx]);
    }
  });
  return surface;
}

}  // namespace fbmtest
