#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fbmtest/fbmtest.hpp"
#include "fbmtest/io.hpp"

namespace fbmtest::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Everything needed to rerun a command, written next to its outputs.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : command_(std::move(command)), argv_(argv), started_(iso_utc_now()),
        start_(std::chrono::steady_clock::now()) {}

  json& params() { return params_; }
  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const fs::path& path) const {
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["parameters"] = params_;
    j["tool_version"] = kVersion;
    j["outputs"] = outputs_;
    j["started_utc"] = started_;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    io::write_json(path, j);
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  std::chrono::steady_clock::time_point start_;
  json params_ = json::object();
  json extra_ = json::object();
  std::vector<std::string> outputs_;
};

fs::path manifest_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension();
  p += ".manifest.json";
  return p;
}

fs::path with_suffix(const fs::path& out, const std::string& suffix) {
  fs::path p = out.parent_path() / out.stem();
  p += suffix;
  p += out.extension().empty() ? fs::path(".csv") : out.extension();
  return p;
}

void require_hurst(double h, const char* flag) {
  if (!(h > 0.0 && h < 1.0)) throw UsageError(std::string(flag) + " must lie in (0,1)");
}

void require_sigma(double s, const char* flag) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw UsageError(std::string(flag) + " must be finite and >= 0");
}

void require_level(double a) {
  if (!(a > 0.0 && a < 1.0)) throw UsageError("--level must lie in (0,1)");
}

QuantileMode parse_mode(const std::string& mode, std::size_t reps, std::uint64_t seed) {
  if (mode == "analytic") return QuantileMode::analytic();
  if (mode == "monte-carlo" || mode == "mc") {
    if (reps == 0) throw UsageError("--mc-reps must be >= 1");
    return QuantileMode::monte_carlo(reps, seed);
  }
  throw UsageError("--mode must be 'analytic' or 'monte-carlo'");
}

json outcome_json(const TestOutcome& o) {
  return {{"statistic", o.statistic}, {"lower", o.lower},   {"upper", o.upper},
          {"p_value", o.p_value},     {"reject", o.reject}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string family;
  double hurst = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::string method = "circulant-embedding";
  std::string layout = "columns";
  std::string out;
};

void cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.n == 0) throw UsageError("--n must be >= 1");
  if (a.count == 0) throw UsageError("--count must be >= 1");
  SimMethod method;
  try {
    method = parse_sim_method(a.method);
  } catch (const std::invalid_argument&) {
    throw UsageError("--method must be circulant-embedding or covariance-factorization");
  }

  std::string spec;
  std::function<std::vector<double>(std::uint64_t)> make;
  if (a.family == "fgn" || a.family == "fbm" || a.family == "noisy-fbm") {
    require_hurst(a.hurst, "--hurst");
    require_sigma(a.sigma, "--sigma");
    const double sigma = a.family == "noisy-fbm" ? a.sigma : 0.0;
    if (a.family != "noisy-fbm" && a.sigma != 0.0) throw UsageError("--sigma requires --family noisy-fbm");
    spec = a.family == "noisy-fbm"
               ? "noisy-fbm(hurst=" + io::format_double(a.hurst) + ",sigma=" + io::format_double(sigma) + ")"
               : "fgn(hurst=" + io::format_double(a.hurst) + ")";
    auto gen = std::make_shared<NoisyFbmGenerator>(a.n, ModelSpec{a.hurst, sigma}, method);
    make = [gen, seed = a.seed](std::uint64_t rep) {
      Engine rng = make_stream(seed, {rep});
      return gen->generate(rng);
    };
  } else if (a.family == "sbm") {
    if (!(a.alpha > 0.0) || !std::isfinite(a.alpha)) throw UsageError("--alpha must be finite and > 0");
    spec = "sbm(alpha=" + io::format_double(a.alpha) + ")";
    auto gen = std::make_shared<SbmGenerator>(a.n, SbmSpec{a.alpha});
    make = [gen, seed = a.seed](std::uint64_t rep) {
      Engine rng = make_stream(seed, {rep});
      return gen->generate(rng);
    };
  } else {
    throw UsageError("--family must be fgn, noisy-fbm or sbm");
  }
  if (a.layout != "columns" && a.layout != "files") throw UsageError("--layout must be 'columns' or 'files'");

  const std::string header = "model=" + spec + " seed=" + std::to_string(a.seed);
  const fs::path out_path(a.out);
  Manifest manifest("simulate", argv);
  manifest.params() = {{"family", a.family}, {"model", spec},         {"n", a.n},
                       {"count", a.count},   {"seed", a.seed},        {"method", to_string(method)},
                       {"layout", a.layout}};
  if (a.layout == "columns") {
    std::vector<std::vector<double>> cols;
    for (std::size_t i = 0; i < a.count; ++i) cols.push_back(make(i));
    auto f = io::open_output(out_path);
    io::write_columns(f, header, cols);
    manifest.add_output(out_path);
  } else {
    for (std::size_t i = 0; i < a.count; ++i) {
      const fs::path p = with_suffix(out_path, "_" + std::to_string(i));
      auto f = io::open_output(p);
      io::write_columns(f, header, {make(i)});
      manifest.add_output(p);
    }
  }
  manifest.write(manifest_path(out_path));
  out << "wrote " << a.count << " series of length " << a.n << " to " << out_path.string() << '\n';
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

struct TestArgs {
  std::string input;
  bool positions = false;
  bool increments = false;
  double hurst0 = std::numeric_limits<double>::quiet_NaN();
  double sigma0 = std::numeric_limits<double>::quiet_NaN();
  std::size_t lag = 1;
  double level = 0.05;
  std::string mode = "analytic";
  std::size_t mc_reps = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_test(const TestArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.positions && a.increments) throw UsageError("--positions and --increments are mutually exclusive");
  require_hurst(a.hurst0, "--hurst0");
  require_sigma(a.sigma0, "--sigma0");
  require_level(a.level);
  const QuantileMode mode = parse_mode(a.mode, a.mc_reps, a.seed);

  const auto cols = io::read_numeric_columns(fs::path(a.input));
  std::vector<IncrementSeries> series;
  for (const auto& c : cols) {
    series.push_back(a.positions ? IncrementSeries::from_positions(c) : IncrementSeries(c));
  }
  const std::size_t n = series.front().n();
  if (a.lag >= n) throw UsageError("--lag must be smaller than the series length " + std::to_string(n));

  const TestConfig cfg{ModelSpec{a.hurst0, a.sigma0}, a.lag, a.level, n, mode};
  const PreparedTest prepared(cfg);
  json results = json::array();
  for (std::size_t i = 0; i < series.size(); ++i) {
    json r = outcome_json(prepared.evaluate(series[i].values()));
    r["series"] = i;
    r["n"] = n;
    results.push_back(std::move(r));
  }
  json report;
  report["null"] = {{"hurst", a.hurst0}, {"sigma", a.sigma0}};
  report["lag"] = a.lag;
  report["level"] = a.level;
  report["mode"] = mode.name();
  if (!mode.is_analytic()) {
    report["mc_reps"] = a.mc_reps;
    report["seed"] = a.seed;
  }
  report["input"] = a.input;
  report["input_kind"] = a.positions ? "positions" : "increments";
  report["results"] = results;
  out << report.dump(2) << '\n';
  if (!a.out.empty()) {
    const fs::path p(a.out);
    io::write_json(p, report);
    Manifest manifest("test", argv);
    manifest.params() = {{"hurst0", a.hurst0}, {"sigma0", a.sigma0}, {"lag", a.lag}, {"level", a.level},
                         {"mode", mode.name()}, {"mc_reps", a.mc_reps}, {"seed", a.seed}, {"input", a.input}};
    manifest.add_output(p);
    manifest.write(manifest_path(p));
  }
}

// ---------------------------------------------------------------------------
// surface
// ---------------------------------------------------------------------------

struct SurfaceArgs {
  std::vector<std::size_t> n{1000};
  double level = 0.05;
  std::size_t lag = 1;
  double h_min = 0.1, h_max = 0.9, h_step = 0.05;
  double s_min = 0.0, s_max = 1.0, s_step = 0.05;
  std::optional<double> fixed_hurst;
  std::optional<double> fixed_sigma;
  std::string mode = "analytic";
  std::size_t mc_reps = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool resume = false;
  std::size_t chunk = 0;  // 0: no limit
  std::string out;
};

bool same_node(double a, double b) { return std::abs(a - b) <= 1e-9; }

void cmd_surface(const SurfaceArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  require_level(a.level);
  if (a.n.empty()) throw UsageError("--n is required");
  for (std::size_t n : a.n) {
    if (n == 0) throw UsageError("--n must be >= 1");
    if (a.lag >= n) throw UsageError("--lag must be smaller than --n");
  }
  SurfaceSpec spec;
  spec.level = a.level;
  spec.lag = a.lag;
  spec.hurst = a.fixed_hurst ? GridRange{*a.fixed_hurst, *a.fixed_hurst, 1.0} : GridRange{a.h_min, a.h_max, a.h_step};
  spec.sigma = a.fixed_sigma ? GridRange{*a.fixed_sigma, *a.fixed_sigma, 1.0} : GridRange{a.s_min, a.s_max, a.s_step};
  if (!a.fixed_hurst && !(a.h_step > 0.0)) throw UsageError("--h-step must be > 0");
  if (!a.fixed_sigma && !(a.s_step > 0.0)) throw UsageError("--sigma-step must be > 0");
  for (double h : spec.hurst.values()) require_hurst(h, a.fixed_hurst ? "--fixed-hurst" : "--h-min/--h-max");
  for (double s : spec.sigma.values()) require_sigma(s, a.fixed_sigma ? "--fixed-sigma" : "--sigma-min/--sigma-max");
  if (spec.hurst.count() == 0) throw UsageError("--h-min must not exceed --h-max");
  if (spec.sigma.count() == 0) throw UsageError("--sigma-min must not exceed --sigma-max");
  spec.mode = parse_mode(a.mode, a.mc_reps, a.seed);
  spec.threads = a.threads;

  const fs::path base(a.out);
  std::vector<std::pair<std::size_t, CriticalSurface>> results;
  bool complete = true;
  for (std::size_t n : a.n) {
    spec.n = n;
    const fs::path csv = a.n.size() == 1 ? base : with_suffix(base, "_n" + std::to_string(n));
    std::vector<SurfaceNode> prior;
    if (a.resume && fs::exists(csv)) prior = io::read_surface_csv(csv);

    // Rows already on disk stay; fresh nodes are appended as they finish so
    // an interrupted sweep can be resumed.
    {
      const bool append = a.resume && fs::exists(csv);
      if (!append) {
        auto f = io::open_output(csv);
        f << io::kSurfaceHeader << '\n';
      }
    }
    std::ofstream appender(csv, std::ios::app | std::ios::binary);
    std::atomic<std::size_t> budget{a.chunk == 0 ? std::numeric_limits<std::size_t>::max() : a.chunk};
    std::atomic<bool> skipped{false};
    SurfaceNode pending_marker;
    pending_marker.error = "pending";
    auto done = [&](double h, double s) -> std::optional<SurfaceNode> {
      for (const auto& p : prior) {
        if (p.ok() && same_node(p.hurst, h) && same_node(p.sigma, s)) return p;
      }
      std::size_t left = budget.load();
      while (left > 0 && !budget.compare_exchange_weak(left, left - 1)) {
      }
      if (left == 0) {
        skipped = true;
        SurfaceNode node = pending_marker;
        node.hurst = h;
        node.sigma = s;
        return node;
      }
      return std::nullopt;
    };
    auto on_node = [&](const SurfaceNode& node) {
      io::write_surface_row(appender, node);
      appender.flush();
    };
    CriticalSurface surface = build_critical_surface(spec, done, on_node);
    appender.close();

    // Final rewrite in grid order, without placeholders for skipped nodes.
    CriticalSurface written = surface;
    std::erase_if(written.nodes, [](const SurfaceNode& nd) { return nd.error == "pending"; });
    {
      auto f = io::open_output(csv);
      io::write_surface_csv(f, written);
    }
    json sidecar = io::surface_sidecar(surface);
    sidecar["complete"] = !skipped.load();
    io::write_json(io::sidecar_path(csv), sidecar);
    complete = complete && !skipped.load();

    Manifest manifest("surface", argv);
    manifest.params() = {{"n", n},
                         {"level", a.level},
                         {"lag", a.lag},
                         {"hurst", spec.hurst.values()},
                         {"sigma", spec.sigma.values()},
                         {"mode", spec.mode.name()},
                         {"mc_reps", a.mc_reps},
                         {"seed", a.seed}};
    manifest.set("complete", !skipped.load());
    manifest.add_output(csv);
    manifest.add_output(io::sidecar_path(csv));
    manifest.write(manifest_path(csv));

    std::size_t failed = 0;
    for (const auto& nd : written.nodes) failed += nd.ok() ? 0 : 1;
    out << "n=" << n << ": " << written.nodes.size() << " nodes written to " << csv.string();
    if (failed) out << " (" << failed << " failed)";
    if (skipped) out << " (incomplete; rerun with --resume)";
    out << '\n';
    results.emplace_back(n, std::move(written));
  }

  // Quantile lines for cross-sections over several lengths.
  if ((a.fixed_hurst || a.fixed_sigma) && a.n.size() > 1) {
    const fs::path lines = with_suffix(base, "_lines");
    auto f = io::open_output(lines);
    f << "n,H,sigma,q_lower,q_upper\n";
    for (const auto& [n, s] : results) {
      for (const auto& nd : s.nodes) {
        f << n << ',' << io::format_double(nd.hurst) << ',' << io::format_double(nd.sigma) << ','
          << io::format_double(nd.q_lower) << ',' << io::format_double(nd.q_upper) << '\n';
      }
    }
    out << "quantile lines written to " << lines.string() << '\n';
  }
  if (!complete) out << "surface incomplete\n";
}

// ---------------------------------------------------------------------------
// power
// ---------------------------------------------------------------------------

struct PowerArgs {
  double hurst0 = std::numeric_limits<double>::quiet_NaN();
  double sigma0 = 0.0;
  std::string family = "noisy-fbm";
  std::vector<double> grid;
  std::optional<double> grid_min, grid_max, grid_step;
  std::optional<double> alt_sigma;
  std::size_t n = 200;
  std::size_t reps = 10000;
  double level = 0.05;
  std::vector<std::size_t> lags{1};
  std::uint64_t seed = 0;
  std::string method = "circulant-embedding";
  std::string mode = "analytic";
  std::size_t mc_reps = 10000;
  std::size_t threads = 0;
  std::string out;
};

void cmd_power(const PowerArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  require_hurst(a.hurst0, "--hurst0");
  require_sigma(a.sigma0, "--sigma0");
  require_level(a.level);
  if (a.n == 0) throw UsageError("--n must be >= 1");
  if (a.reps == 0) throw UsageError("--reps must be >= 1");
  for (std::size_t k : a.lags) {
    if (k >= a.n) throw UsageError("--lag must be smaller than --n");
  }
  PowerStudyConfig cfg;
  cfg.null_model = {a.hurst0, a.sigma0};
  try {
    cfg.family = parse_alternative_family(a.family);
    cfg.method = parse_sim_method(a.method);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--family/--method: ") + e.what());
  }
  cfg.grid = a.grid;
  if (cfg.grid.empty()) {
    if (!a.grid_min || !a.grid_max || !a.grid_step) {
      throw UsageError("give --grid values or all of --grid-min, --grid-max, --grid-step");
    }
    if (!(*a.grid_step > 0.0)) throw UsageError("--grid-step must be > 0");
    cfg.grid = GridRange{*a.grid_min, *a.grid_max, *a.grid_step}.values();
  }
  if (cfg.grid.empty()) throw UsageError("--grid is empty");
  for (double g : cfg.grid) {
    if (cfg.family == AlternativeFamily::NoisyFbm) {
      require_hurst(g, "--grid (Hurst values)");
    } else if (!(g > 0.0)) {
      throw UsageError("--grid (alpha values) must be > 0");
    }
  }
  if (a.alt_sigma) require_sigma(*a.alt_sigma, "--alt-sigma");
  cfg.alternative_sigma = a.alt_sigma;
  cfg.n = a.n;
  cfg.replications = a.reps;
  cfg.level = a.level;
  cfg.lag = a.lags.front();
  cfg.seed = a.seed;
  cfg.mode = parse_mode(a.mode, a.mc_reps, a.seed);
  cfg.threads = a.threads;

  const auto curves = lag_comparison(cfg, a.lags);
  const fs::path base(a.out);
  Manifest manifest("power", argv);
  manifest.params() = {{"hurst0", a.hurst0}, {"sigma0", a.sigma0}, {"family", a.family},   {"grid", cfg.grid},
                       {"n", a.n},           {"reps", a.reps},     {"level", a.level},     {"lags", a.lags},
                       {"seed", a.seed},     {"method", a.method}, {"mode", cfg.mode.name()}};
  if (a.alt_sigma) manifest.params()["alt_sigma"] = *a.alt_sigma;
  for (const auto& curve : curves) {
    const fs::path csv = curves.size() == 1 ? base : with_suffix(base, "_k" + std::to_string(curve.lag));
    {
      auto f = io::open_output(csv);
      io::write_power_csv(f, curve);
    }
    io::write_json(io::sidecar_path(csv), io::power_sidecar(cfg, curve.lag));
    manifest.add_output(csv);
    manifest.add_output(io::sidecar_path(csv));
    out << "lag " << curve.lag << ":";
    for (const auto& p : curve.points) out << ' ' << io::format_double(p.param) << "->" << p.power;
    out << '\n';
  }
  manifest.write(manifest_path(base));
}

// ---------------------------------------------------------------------------
// chf-check
// ---------------------------------------------------------------------------

struct ChfArgs {
  double hurst = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.2;
  std::size_t n = 128;
  std::size_t lag = 3;
  std::size_t reps = 100000;
  double t_min = -5.0, t_max = 5.0, t_step = 0.05;
  std::uint64_t seed = 0;
  std::string method = "circulant-embedding";
  std::size_t threads = 0;
  std::string out;
};

void cmd_chfcheck(const ChfArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  require_hurst(a.hurst, "--hurst");
  require_sigma(a.sigma, "--sigma");
  if (a.n == 0) throw UsageError("--n must be >= 1");
  if (a.lag >= a.n) throw UsageError("--lag must be smaller than --n");
  if (a.reps == 0) throw UsageError("--reps must be >= 1");
  if (!(a.t_step > 0.0) || a.t_max < a.t_min) throw UsageError("--t-min/--t-max/--t-step describe an empty grid");
  SimMethod method;
  try {
    method = parse_sim_method(a.method);
  } catch (const std::invalid_argument&) {
    throw UsageError("--method must be circulant-embedding or covariance-factorization");
  }
  const ModelSpec model{a.hurst, a.sigma};
  const GChi2Law law(null_weights(a.n, a.lag, model));
  const auto stats = simulate_null_statistics(a.n, a.lag, model, a.reps, a.seed, method, a.threads);

  const fs::path csv(a.out);
  auto f = io::open_output(csv);
  f << "t,re_analytic,im_analytic,re_empirical,im_empirical,abs_diff\n";
  double sup_re = 0.0;
  double sup_im = 0.0;
  const std::size_t count = static_cast<std::size_t>(std::floor((a.t_max - a.t_min) / a.t_step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = std::round((a.t_min + a.t_step * static_cast<double>(i)) * 1e12) / 1e12;
    const auto an = law.chf(t) + std::complex<double>(0.0, 0.0);
    const auto em = empirical_chf(stats, t);
    const double dre = std::abs(an.real() - em.real());
    const double dim = std::abs(an.imag() - em.imag());
    sup_re = std::max(sup_re, dre);
    sup_im = std::max(sup_im, dim);
    f << io::format_double(t) << ',' << io::format_double(an.real()) << ',' << io::format_double(an.imag()) << ','
      << io::format_double(em.real()) << ',' << io::format_double(em.imag()) << ','
      << io::format_double(std::max(dre, dim)) << '\n';
  }
  f.close();
  Manifest manifest("chf-check", argv);
  manifest.params() = {{"hurst", a.hurst}, {"sigma", a.sigma}, {"n", a.n},         {"lag", a.lag},
                       {"reps", a.reps},   {"t_min", a.t_min}, {"t_max", a.t_max}, {"t_step", a.t_step},
                       {"seed", a.seed},   {"method", to_string(method)}};
  manifest.set("sup_abs_diff_real", sup_re);
  manifest.set("sup_abs_diff_imag", sup_im);
  manifest.add_output(csv);
  manifest.write(manifest_path(csv));
  out << "sup |Re diff| = " << sup_re << ", sup |Im diff| = " << sup_im << " over " << count << " points\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact autocovariance test for fractional Brownian motion with additive white noise", "fbmtest"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate FGN, noisy-FBM or SBM increment series");
  sim->add_option("--family", sa.family, "fgn | noisy-fbm | sbm")->required();
  sim->add_option("--hurst", sa.hurst, "Hurst index H in (0,1)");
  sim->add_option("--sigma", sa.sigma, "Noise standard deviation (noisy-fbm)");
  sim->add_option("--alpha", sa.alpha, "SBM exponent alpha > 0");
  sim->add_option("--n", sa.n, "Series length (increments)")->required();
  sim->add_option("--count", sa.count, "Number of series");
  sim->add_option("--seed", sa.seed, "Base seed")->envname("FBMTEST_SEED");
  sim->add_option("--method", sa.method, "circulant-embedding | covariance-factorization");
  sim->add_option("--layout", sa.layout, "columns (one file) | files (one file per series)");
  sim->add_option("--out", sa.out, "Output CSV path")->required();

  TestArgs ta;
  auto* test = app.add_subcommand("test", "Test series against a noisy-FBM null");
  test->add_option("--input", ta.input, "CSV with one series per column")->required();
  test->add_flag("--positions", ta.positions, "Columns hold positions (n+1 values), difference them");
  test->add_flag("--increments", ta.increments, "Columns hold increments (default)");
  test->add_option("--hurst0", ta.hurst0, "Null Hurst index")->required();
  test->add_option("--sigma0", ta.sigma0, "Null noise standard deviation")->required();
  test->add_option("--lag", ta.lag, "Autocovariance lag k");
  test->add_option("--level", ta.level, "Significance level a");
  test->add_option("--mode", ta.mode, "analytic | monte-carlo");
  test->add_option("--mc-reps", ta.mc_reps, "Replications for monte-carlo quantiles");
  test->add_option("--seed", ta.seed, "Seed for monte-carlo quantiles")->envname("FBMTEST_SEED");
  test->add_option("--out", ta.out, "Also write the JSON report here");

  SurfaceArgs ua;
  std::vector<std::size_t> surface_n;
  std::optional<double> fixed_h, fixed_s;
  auto* surf = app.add_subcommand("surface", "Critical surface q(N, a, H, sigma) over an (H, sigma) grid");
  surf->add_option("--n", surface_n, "Series length(s)")->required();
  surf->add_option("--level", ua.level, "Significance level a");
  surf->add_option("--lag", ua.lag, "Autocovariance lag k");
  surf->add_option("--h-min", ua.h_min);
  surf->add_option("--h-max", ua.h_max);
  surf->add_option("--h-step", ua.h_step);
  surf->add_option("--sigma-min", ua.s_min);
  surf->add_option("--sigma-max", ua.s_max);
  surf->add_option("--sigma-step", ua.s_step);
  surf->add_option("--fixed-hurst", fixed_h, "Cross-section at this H");
  surf->add_option("--fixed-sigma", fixed_s, "Cross-section at this sigma");
  surf->add_option("--mode", ua.mode, "analytic | monte-carlo");
  surf->add_option("--mc-reps", ua.mc_reps, "Replications for monte-carlo quantiles");
  surf->add_option("--seed", ua.seed)->envname("FBMTEST_SEED");
  surf->add_option("--threads", ua.threads, "Worker threads (0: all)")->envname("FBMTEST_THREADS");
  surf->add_flag("--resume", ua.resume, "Reuse finished nodes from an existing output file");
  surf->add_option("--chunk", ua.chunk, "Compute at most this many new nodes, then stop");
  surf->add_option("--out", ua.out, "Output CSV path")->required();

  PowerArgs pa;
  std::vector<std::size_t> power_lags;
  std::optional<double> gmin, gmax, gstep, alt_sigma;
  auto* pow = app.add_subcommand("power", "Monte Carlo power study against a fixed null");
  pow->add_option("--hurst0", pa.hurst0, "Null Hurst index")->required();
  pow->add_option("--sigma0", pa.sigma0, "Null noise standard deviation");
  pow->add_option("--family", pa.family, "noisy-fbm | sbm");
  pow->add_option("--grid", pa.grid, "Alternative parameters (H or alpha)")->delimiter(',');
  pow->add_option("--grid-min", gmin);
  pow->add_option("--grid-max", gmax);
  pow->add_option("--grid-step", gstep);
  pow->add_option("--alt-sigma", alt_sigma, "Noise of noisy-fbm alternatives (default: --sigma0)");
  pow->add_option("--n", pa.n, "Series length");
  pow->add_option("--reps", pa.reps, "Replications m per grid point");
  pow->add_option("--level", pa.level, "Significance level a");
  pow->add_option("--lag", power_lags, "Lag(s); several lags share replications")->delimiter(',');
  pow->add_option("--seed", pa.seed)->envname("FBMTEST_SEED");
  pow->add_option("--method", pa.method);
  pow->add_option("--mode", pa.mode, "analytic | monte-carlo");
  pow->add_option("--mc-reps", pa.mc_reps);
  pow->add_option("--threads", pa.threads, "Worker threads (0: all)")->envname("FBMTEST_THREADS");
  pow->add_option("--out", pa.out, "Output CSV path")->required();

  ChfArgs ca;
  auto* chf = app.add_subcommand("chf-check", "Compare analytic and empirical characteristic functions of r_hat(k)");
  chf->add_option("--hurst", ca.hurst)->required();
  chf->add_option("--sigma", ca.sigma);
  chf->add_option("--n", ca.n);
  chf->add_option("--lag", ca.lag);
  chf->add_option("--reps", ca.reps);
  chf->add_option("--t-min", ca.t_min);
  chf->add_option("--t-max", ca.t_max);
  chf->add_option("--t-step", ca.t_step);
  chf->add_option("--seed", ca.seed)->envname("FBMTEST_SEED");
  chf->add_option("--method", ca.method);
  chf->add_option("--threads", ca.threads, "Worker threads (0: all)")->envname("FBMTEST_THREADS");
  chf->add_option("--out", ca.out, "Output CSV path")->required();

  std::vector<const char*> cargv;
  cargv.reserve(args.size());
  for (const auto& s : args) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream help;
      app.exit(e, help, help);
      out << help.str();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      cmd_simulate(sa, args, out);
    } else if (test->parsed()) {
      cmd_test(ta, args, out);
    } else if (surf->parsed()) {
      ua.n = surface_n;
      ua.fixed_hurst = fixed_h;
      ua.fixed_sigma = fixed_s;
      cmd_surface(ua, args, out);
    } else if (pow->parsed()) {
      if (!power_lags.empty()) pa.lags = power_lags;
      pa.grid_min = gmin;
      pa.grid_max = gmax;
      pa.grid_step = gstep;
      pa.alt_sigma = alt_sigma;
      cmd_power(pa, args, out);
    } else if (chf->parsed()) {
      cmd_chfcheck(ca, args, out);
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace fbmtest::cli
