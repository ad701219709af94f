// Monte Carlo power of the r_hat(k) test against noisy-FBM and SBM
// alternatives.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbmtest/errors.hpp"
#include "fbmtest/parallel.hpp"
#include "fbmtest/rng.hpp"
#include "fbmtest/sim.hpp"
#include "fbmtest/testkit.hpp"

namespace fbmtest {

enum class AlternativeFamily { NoisyFbm, Sbm };

inline std::string to_string(AlternativeFamily f) { return f == AlternativeFamily::NoisyFbm ? "noisy-fbm" : "sbm"; }

inline AlternativeFamily parse_alternative_family(const std::string& s) {
  if (s == "noisy-fbm" || s == "fbm") return AlternativeFamily::NoisyFbm;
  if (s == "sbm") return AlternativeFamily::Sbm;
  throw std::invalid_argument("unknown alternative family '" + s + "'");
}

struct PowerStudyConfig {
  ModelSpec null_model;
  AlternativeFamily family = AlternativeFamily::NoisyFbm;
  // Hurst values for noisy-fbm alternatives, alpha values for sbm.
  std::vector<double> grid;
  // Noise level of noisy-fbm alternatives; defaults to the null sigma.
  std::optional<double> alternative_sigma;
  std::size_t n = 200;
  std::size_t replications = 10000;
  double level = 0.05;
  std::size_t lag = 1;
  std::uint64_t seed = 0;
  SimMethod method = SimMethod::CirculantEmbedding;
  QuantileMode mode;
  std::size_t threads = 0;

  double sigma_for_alternative() const { return alternative_sigma.value_or(null_model.sigma); }

  void validate() const {
    null_model.validate();
    if (replications == 0) throw DomainError("power study needs at least one replication");
    if (grid.empty()) throw DomainError("power study needs a non-empty alternative grid");
    check_lag(n, lag);
    if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0,1)");
  }
};

struct PowerPoint {
  double param = 0.0;
  double power = 0.0;
  double se = 0.0;
  std::size_t m = 0;
  std::size_t rejections = 0;
};

struct PowerCurve {
  std::size_t lag = 1;
  std::vector<PowerPoint> points;
};

inline PowerPoint make_power_point(double param, std::size_t rejections, std::size_t m) {
  const double p = static_cast<double>(rejections) / static_cast<double>(m);
  return {param, p, std::sqrt(p * (1.0 - p) / static_cast<double>(m)), m, rejections};
}

using SeriesSampler = std::function<void(Engine&, std::span<double>)>;

inline SeriesSampler make_alternative_sampler(const PowerStudyConfig& cfg, double param) {
  if (cfg.family == AlternativeFamily::NoisyFbm) {
    auto gen = std::make_shared<NoisyFbmGenerator>(cfg.n, ModelSpec{param, cfg.sigma_for_alternative()}, cfg.method);
    return [gen](Engine& rng, std::span<double> out) { gen->generate(rng, out); };
  }
  auto gen = std::make_shared<SbmGenerator>(cfg.n, SbmSpec{param});
  return [gen](Engine& rng, std::span<double> out) { gen->generate(rng, out); };
}

/// Rejection fractions for several lags on the same simulated paths:
/// replication r at grid point g always uses stream (seed, g, r), so the
/// lag-k curve here equals estimate_power with lag k.
inline std::vector<PowerCurve> lag_comparison(const PowerStudyConfig& cfg, const std::vector<std::size_t>& lags) {
  if (lags.empty()) throw DomainError("lag comparison needs at least one lag");
  std::vector<PreparedTest> tests;
  tests.reserve(lags.size());
  for (std::size_t k : lags) {
    PowerStudyConfig c = cfg;
    c.lag = k;
    c.validate();
    tests.emplace_back(TestConfig{cfg.null_model, k, cfg.level, cfg.n, cfg.mode});
  }

  std::vector<PowerCurve> curves(lags.size());
  for (std::size_t l = 0; l < lags.size(); ++l) curves[l].lag = lags[l];

  const std::size_t m = cfg.replications;
  for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
    const SeriesSampler sampler = make_alternative_sampler(cfg, cfg.grid[g]);
    // rejected[r * lags + l]
    std::vector<unsigned char> rejected(m * lags.size(), 0);
    parallel_for(m, cfg.threads, [&](std::size_t r) {
      Engine rng = make_stream(cfg.seed, {g, r});
      thread_local std::vector<double> x;
      x.resize(cfg.n);
      sampler(rng, x);
      for (std::size_t l = 0; l < lags.size(); ++l) {
        const double stat = acvf_statistic(x, lags[l]);
        rejected[r * lags.size() + l] = tests[l].interval().retains(stat) ? 0 : 1;
      }
    });
    for (std::size_t l = 0; l < lags.size(); ++l) {
      std::size_t count = 0;
      for (std::size_t r = 0; r < m; ++r) count += rejected[r * lags.size() + l];
      curves[l].points.push_back(make_power_point(cfg.grid[g], count, m));
    }
  }
  return curves;
}

/// Power curve over the alternative grid; the critical interval of the
/// fixed null is computed once.
inline PowerCurve estimate_power(const PowerStudyConfig& cfg) {
  cfg.validate();
  return lag_comparison(cfg, {cfg.lag}).front();
}

}  // namespace fbmtest
