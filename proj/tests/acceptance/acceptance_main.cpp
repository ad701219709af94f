// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fbmtest/fbmtest.hpp"
#include "oracles.hpp"

using namespace fbmtest;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[violated] " << what << "; ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

// r_hat(k) for several lags on the same simulated null paths.
std::vector<std::vector<double>> null_statistics(std::size_t n, const std::vector<std::size_t>& lags,
                                                 const ModelSpec& model, std::size_t reps, std::uint64_t seed) {
  const NoisyFbmGenerator gen(n, model);
  std::vector<std::vector<double>> out(lags.size(), std::vector<double>(reps));
  parallel_for(reps, 0, [&](std::size_t r) {
    Engine rng = make_stream(seed, {r});
    thread_local std::vector<double> x;
    x.resize(n);
    gen.generate(rng, x);
    for (std::size_t l = 0; l < lags.size(); ++l) out[l][r] = acvf_statistic(x, lags[l]);
  });
  return out;
}

// trace((A_k Sigma)^2) from the dense product.
double trace_square(std::size_t n, std::size_t k, const ModelSpec& model) {
  const Eigen::MatrixXd m = build_qf_matrix(n, k).entries * covariance_matrix(n, model).entries;
  return m.cwiseProduct(m.transpose()).sum();
}

const std::vector<std::size_t> kLengths{200, 1000};
const std::vector<double> kHursts{0.3, 0.5, 0.7};
const std::vector<double> kSigmas{0.0, 0.3};

// 1. Simulated statistics versus generalized chi-squared draws, two-sample KS.
Verdict criterion1() {
  Verdict v;
  const std::size_t m = 10000;
  const double crit = oracle::ks_critical(0.001, m, m);
  double worst = 0.0;
  double slowest = 0.0;
  std::uint64_t cell = 0;
  for (std::size_t n : kLengths) {
    for (double h : kHursts) {
      for (double s : kSigmas) {
        const auto t0 = std::chrono::steady_clock::now();
        const ModelSpec model{h, s};
        const auto stats = null_statistics(n, {1, 2}, model, m, 1000 + cell);
        for (std::size_t k : {1u, 2u}) {
          const GChi2Law law(null_weights(n, k, model));
          const auto draws = gchi2_sample(law, m, 2000 + cell, k);
          const double d = oracle::ks_two_sample(stats[k - 1], draws);
          worst = std::max(worst, d / crit);
          v.require(d < crit, "n=" + std::to_string(n) + " k=" + std::to_string(k) + " H=" + fmt(h, 1) +
                                  " sigma=" + fmt(s, 1) + " D=" + fmt(d) + " >= " + fmt(crit));
        }
        // Two lags per (n, H, sigma) share one set of paths; charge half to each cell.
        const double per_cell = seconds_since(t0) / 2;
        slowest = std::max(slowest, per_cell);
        v.require(per_cell < 300, "cell runtime " + fmt(per_cell, 1) + " s");
        ++cell;
      }
    }
  }
  v.detail << "24 cells, max D/critical = " << fmt(worst, 3) << " (critical " << fmt(crit) << "), slowest cell "
           << fmt(slowest, 1) << " s";
  return v;
}

// 2. Empirical versus analytic characteristic function of r_hat(3).
Verdict criterion2() {
  Verdict v;
  for (double h : {0.3, 0.7}) {
    const ModelSpec model{h, 0.2};
    const GChi2Law law(null_weights(128, 3, model));
    const auto stats = simulate_null_statistics(128, 3, model, 100000, 3000 + static_cast<std::uint64_t>(h * 10));
    double sup_re = 0, sup_im = 0;
    for (int i = 0; i <= 200; ++i) {
      const double t = -5.0 + 0.05 * i;
      const auto a = law.chf(t);
      const auto e = empirical_chf(stats, t);
      sup_re = std::max(sup_re, std::abs(a.real() - e.real()));
      sup_im = std::max(sup_im, std::abs(a.imag() - e.imag()));
    }
    v.require(sup_re < 0.02 && sup_im < 0.02, "H=" + fmt(h, 1) + " sup diff " + fmt(std::max(sup_re, sup_im)));
    v.detail << "H=" << fmt(h, 1) << ": sup|Re| " << fmt(sup_re) << ", sup|Im| " << fmt(sup_im) << "; ";
  }
  return v;
}

// 3. Analytic quantile pair at n=200, H=0.3, sigma=0.3, k=1, a=0.05.
Verdict criterion3() {
  Verdict v;
  const PreparedTest t(TestConfig{ModelSpec{0.3, 0.3}, 1, 0.05, 200, {}});
  const auto iv = t.interval();
  const double center = noisy_increment_acvf(1, {0.3, 0.3});
  v.require(std::abs(iv.lower + 0.51) <= 0.03, "lower " + fmt(iv.lower) + " not within 0.03 of -0.51");
  v.require(std::abs(iv.upper + 0.16) <= 0.03, "upper " + fmt(iv.upper) + " not within 0.03 of -0.16");
  v.require(std::abs(iv.midpoint() - center) <= 0.02, "midpoint " + fmt(iv.midpoint()) + " vs " + fmt(center));
  const PreparedTest alt(TestConfig{ModelSpec{0.3, 0.2}, 1, 0.05, 200, {}});
  v.detail << "(" << fmt(iv.lower) << ", " << fmt(iv.upper) << "), midpoint " << fmt(iv.midpoint())
           << ", r_M(1) = " << fmt(center) << "; informational: sigma=0.2 gives (" << fmt(alt.interval().lower)
           << ", " << fmt(alt.interval().upper) << ")";
  return v;
}

// 4. Trace identities and the Monte Carlo variance of the statistic.
Verdict criterion4() {
  Verdict v;
  double worst_sum = 0, worst_sq = 0, worst_mc = 0;
  std::uint64_t cell = 0;
  for (std::size_t n : kLengths) {
    for (double h : kHursts) {
      for (double s : kSigmas) {
        const ModelSpec model{h, s};
        const auto stats = null_statistics(n, {1, 2}, model, 100000, 4000 + cell++);
        for (std::size_t k : {1u, 2u}) {
          const auto w = null_weights(n, k, model);
          const double r = noisy_increment_acvf(k, model);
          // Relative to r_M(0) when r_M(k) vanishes (white increments).
          const double scale = std::max(std::abs(r), noisy_increment_acvf(0, model));
          const double e_sum = std::abs(w.sum() - r) / scale;
          double sq = 0;
          for (double l : w.lambdas) sq += l * l;
          const double tr2 = trace_square(n, k, model);
          const double e_sq = std::abs(sq - tr2) / tr2;
          const double mc = oracle::variance(stats[k - 1]);
          const double e_mc = std::abs(mc / (2 * sq) - 1);
          worst_sum = std::max(worst_sum, e_sum);
          worst_sq = std::max(worst_sq, e_sq);
          worst_mc = std::max(worst_mc, e_mc);
          const std::string tag = " n=" + std::to_string(n) + " k=" + std::to_string(k) + " H=" + fmt(h, 1) +
                                  " sigma=" + fmt(s, 1);
          v.require(e_sum <= 1e-9, "trace" + tag);
          v.require(e_sq <= 1e-9, "second moment" + tag);
          v.require(e_mc <= 0.03, "MC variance" + tag + " rel err " + fmt(e_mc));
        }
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf), "max rel err: sum %.2e, sum of squares %.2e, MC variance %.4f (24 cells)", worst_sum,
                worst_sq, worst_mc);
  v.detail << buf;
  return v;
}

// 5. Size of the test under the true null.
Verdict criterion5() {
  Verdict v;
  double lo = 1, hi = 0;
  std::uint64_t cell = 0;
  for (double h : kHursts) {
    for (std::size_t n : kLengths) {
      for (double s : kSigmas) {
        const TestConfig cfg{ModelSpec{h, s}, 1, 0.05, n, {}};
        const PreparedTest t(cfg);
        const auto stats = simulate_null_statistics(n, 1, cfg.model0, 10000, 5000 + cell++);
        std::size_t rej = 0;
        for (double x : stats) rej += t.interval().retains(x) ? 0 : 1;
        const double size = rej / 1e4;
        lo = std::min(lo, size);
        hi = std::max(hi, size);
        v.require(std::abs(size - 0.05) <= 0.01, "H0=" + fmt(h, 1) + " n=" + std::to_string(n) + " sigma0=" +
                                                     fmt(s, 1) + " size " + fmt(size));
      }
    }
  }
  v.detail << "12 cells, rejection fractions in [" << fmt(lo) << ", " << fmt(hi) << "]";
  return v;
}

PowerStudyConfig power_cfg(double h0, double s0, std::vector<double> grid, std::size_t n, std::uint64_t seed) {
  PowerStudyConfig cfg;
  cfg.null_model = {h0, s0};
  cfg.grid = std::move(grid);
  cfg.n = n;
  cfg.replications = 10000;
  cfg.seed = seed;
  return cfg;
}

double se2(const PowerPoint& a, const PowerPoint& b) { return 2 * std::hypot(a.se, b.se); }

// 6. Power-study orderings.
Verdict criterion6() {
  Verdict v;
  const std::vector<double> hgrid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  // (a) minimum at H = H0, and monotone departure on each side.
  for (double h0 : kHursts) {
    const auto curve = estimate_power(power_cfg(h0, 0.3, hgrid, 200, 600 + static_cast<std::uint64_t>(h0 * 10)));
    const auto& p = curve.points;
    const std::size_t i0 = static_cast<std::size_t>(std::lround(h0 * 10)) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v.require(p[i0].power <= p[i].power + se2(p[i0], p[i]),
                "(a) H0=" + fmt(h0, 1) + ": power at H=" + fmt(p[i].param, 1) + " below power at H0");
    }
    for (std::size_t i = 0; i + 1 <= i0 && i0 > 0; ++i)
      v.require(p[i].power + se2(p[i], p[i + 1]) >= p[i + 1].power, "(a) monotone left of H0=" + fmt(h0, 1));
    for (std::size_t i = i0; i + 1 < p.size(); ++i)
      v.require(p[i + 1].power + se2(p[i], p[i + 1]) >= p[i].power, "(a) monotone right of H0=" + fmt(h0, 1));
    v.detail << "(a) H0=" << fmt(h0, 1) << " power at H0 " << fmt(p[i0].power, 3) << "; ";
  }

  // (b) noise degrades power at fixed |H - H0|.
  {
    const double h0 = 0.5;
    const std::vector<double> alts{0.3, 0.4, 0.6, 0.7};
    std::vector<PowerCurve> by_sigma;
    for (double s0 : {0.1, 0.3, 0.5}) by_sigma.push_back(estimate_power(power_cfg(h0, s0, alts, 200, 610)));
    for (std::size_t i = 0; i < alts.size(); ++i) {
      for (std::size_t j = 0; j + 1 < by_sigma.size(); ++j) {
        const auto& a = by_sigma[j].points[i];
        const auto& b = by_sigma[j + 1].points[i];
        v.require(b.power <= a.power + se2(a, b), "(b) power rises with sigma0 at H=" + fmt(alts[i], 1));
      }
    }
    v.detail << "(b) H=0.3 power for sigma0 0.1/0.3/0.5: " << fmt(by_sigma[0].points[0].power, 3) << "/"
             << fmt(by_sigma[1].points[0].power, 3) << "/" << fmt(by_sigma[2].points[0].power, 3) << "; ";
  }

  // (c) lag 1 beats lag 2 at |H - H0| = 0.2 under common random numbers.
  {
    const auto curves = lag_comparison(power_cfg(0.5, 0.3, {0.3, 0.7}, 200, 620), {1, 2});
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& a = curves[0].points[i];
      const auto& b = curves[1].points[i];
      v.require(a.power + se2(a, b) >= b.power, "(c) lag 2 beats lag 1 at H=" + fmt(a.param, 1));
      v.detail << "(c) H=" << fmt(a.param, 1) << " k1 " << fmt(a.power, 3) << " k2 " << fmt(b.power, 3) << "; ";
    }
  }

  // (d), (e) SBM alternatives on alpha = 2H, H in {0.1, ..., 1.0}.
  std::vector<double> alphas;
  for (int i = 1; i <= 10; ++i) alphas.push_back(0.2 * i);
  for (std::size_t n : kLengths) {
    auto cfg = power_cfg(0.5, 0.0, alphas, n, 630 + n);
    cfg.family = AlternativeFamily::Sbm;
    double max_sub = 0, min_super = 1;
    for (const auto& p : estimate_power(cfg).points) {
      if (p.param < 1.0 - 1e-9) {
        max_sub = std::max(max_sub, p.power);
        v.require(p.power < 0.1 + 2 * p.se, "(d) n=" + std::to_string(n) + " alpha=" + fmt(p.param, 1) +
                                                 " power " + fmt(p.power, 3));
      }
      if (p.param >= 1.6 - 1e-9) {
        min_super = std::min(min_super, p.power);
        v.require(p.power > 0.9 - 2 * p.se, "(d) n=" + std::to_string(n) + " alpha=" + fmt(p.param, 1) +
                                                 " power " + fmt(p.power, 3));
      }
    }
    v.detail << "(d) n=" << n << " max power alpha<1 " << fmt(max_sub, 3) << ", min power alpha>=1.6 "
             << fmt(min_super, 3) << "; ";
  }
  for (std::size_t n : kLengths) {
    auto cfg = power_cfg(0.7, 0.0, alphas, n, 640 + n);
    cfg.family = AlternativeFamily::Sbm;
    const auto pts = estimate_power(cfg).points;
    const auto it = std::min_element(pts.begin(), pts.end(),
                                     [](const PowerPoint& a, const PowerPoint& b) { return a.power < b.power; });
    v.require(it->power > 0.7 - 2 * it->se, "(e) n=" + std::to_string(n) + " minimum power " + fmt(it->power, 3));
    v.require(std::abs(it->param - 1.4) <= 0.2 + 1e-9,
              "(e) n=" + std::to_string(n) + " minimum at alpha=" + fmt(it->param, 1));
    v.detail << "(e) n=" << n << " min power " << fmt(it->power, 3) << " at alpha=" << fmt(it->param, 1) << "; ";
  }
  return v;
}

// 7. Power-law decay of the FGN autocovariance.
Verdict criterion7() {
  Verdict v;
  for (double h : {0.3, 0.7}) {
    const double ratio = fgn_acvf(10000, h) / (h * (2 * h - 1) * std::pow(1e4, 2 * h - 2));
    v.require(ratio >= 0.99 && ratio <= 1.01, "H=" + fmt(h, 1) + " ratio " + fmt(ratio, 6));
    v.detail << "H=" << fmt(h, 1) << " ratio " << fmt(ratio, 6) << "; ";
  }
  return v;
}

// 8. Probability integral transform of generalized chi-squared draws.
Verdict criterion8() {
  Verdict v;
  struct Case {
    std::string name;
    QFWeights weights;
  };
  const std::vector<Case> cases{{"n=200 k=1 H=0.3 sigma=0.3", null_weights(200, 1, {0.3, 0.3})},
                                {"n=4 k=1 H=0.7 sigma=0.3", null_weights(4, 1, {0.7, 0.3})}};
  std::uint64_t seed = 800;
  for (const auto& c : cases) {
    const GChi2Law law(c.weights);
    const auto draws = gchi2_sample(law, 100000, seed++);
    std::vector<double> u(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) u[i] = law.cdf(draws[i]);
    const double d = oracle::ks_one_sample(u, [](double x) { return x; });
    v.require(d < 0.005, c.name + " KS " + fmt(d, 5));
    v.detail << c.name << " (" << (law.uses_grid() ? "grid" : "Fourier") << " route): KS " << fmt(d, 5) << "; ";
  }
  return v;
}

// 9. Cost of null weights at n = 1000 and of a full 17 x 21 surface.
Verdict criterion9() {
  Verdict v;
  auto t0 = std::chrono::steady_clock::now();
  const auto w = null_weights(1000, 1, {0.3, 0.3});
  const double t_weights = seconds_since(t0);
  v.require(t_weights < 30, "null weights took " + fmt(t_weights, 1) + " s");

  SurfaceSpec spec;
  spec.n = 1000;
  t0 = std::chrono::steady_clock::now();
  const auto surface = build_critical_surface(spec);
  const double t_surface = seconds_since(t0);
  std::size_t bad = 0;
  for (const auto& node : surface.nodes) bad += (node.ok() && node.q_lower < node.q_upper) ? 0 : 1;
  v.require(surface.nodes.size() == 17 * 21, "surface has " + std::to_string(surface.nodes.size()) + " nodes");
  v.require(bad == 0, std::to_string(bad) + " surface nodes failed");
  v.require(t_surface < 7200, "surface took " + fmt(t_surface, 0) + " s");

  // Per-node resume: drop every other node, recompute only those.
  std::size_t recomputed = 0;
  auto done = [&](double h, double s) -> std::optional<SurfaceNode> {
    for (std::size_t i = 0; i < surface.nodes.size(); i += 2)
      if (surface.nodes[i].hurst == h && surface.nodes[i].sigma == s) return surface.nodes[i];
    return std::nullopt;
  };
  SurfaceSpec small = spec;
  small.hurst = {0.3, 0.35, 0.05};
  small.sigma = {0.0, 0.1, 0.05};
  const auto resumed = build_critical_surface(small, done, [&](const SurfaceNode&) { ++recomputed; });
  bool same = true;
  for (const auto& node : resumed.nodes) {
    for (const auto& ref : surface.nodes)
      if (ref.hurst == node.hurst && ref.sigma == node.sigma)
        same = same && ref.q_lower == node.q_lower && ref.q_upper == node.q_upper;
  }
  v.require(same, "resumed nodes differ from the uninterrupted sweep");
  v.detail << "null weights n=1000: " << fmt(t_weights, 2) << " s; full surface (" << surface.nodes.size()
           << " nodes, " << default_threads() << " thread(s)): " << fmt(t_surface, 0) << " s; resume recomputed "
           << recomputed << "/" << resumed.nodes.size() << " nodes, identical: " << (same ? "yes" : "no");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " [" << fmt(seconds_since(t0), 1) << " s] "
              << v.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
