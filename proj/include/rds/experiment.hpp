#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rds/circle_map.hpp"
#include "rds/config.hpp"
#include "rds/csv.hpp"
#include "rds/dynamics.hpp"
#include "rds/grid_function.hpp"
#include "rds/hypothesis.hpp"
#include "rds/koopman.hpp"
#include "rds/manifest.hpp"
#include "rds/noise.hpp"
#include "rds/occupation.hpp"
#include "rds/parallel.hpp"
#include "rds/passage.hpp"

namespace rds {

using ojson = nlohmann::ordered_json;

/// Writes run outputs into one directory and records each file for the manifest.
class RunOutputs {
 public:
  explicit RunOutputs(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<ManifestFile>& files() const { return files_; }
  const std::vector<std::string>& flags() const { return flags_; }
  void flag(std::string f) { flags_.push_back(std::move(f)); }

  void csv(const std::string& name, const CsvWriter& w) {
    w.save((dir_ / name).string());
    files_.push_back({name, std::string(w.schema().name), w.schema().version, w.rows(), sha256_hex(w.text())});
  }

  void json(const std::string& name, const ojson& j) {
    const std::string text = j.dump(2) + "\n";
    std::ofstream f(dir_ / name, std::ios::binary);
    require(f.good(), ErrorCode::precondition, "cannot open '" + (dir_ / name).string() + "' for writing");
    f << text;
    files_.push_back({name, "json", 1, 0, sha256_hex(text)});
  }

 private:
  std::filesystem::path dir_;
  std::vector<ManifestFile> files_;
  std::vector<std::string> flags_;
};

/// Validated configuration with the map built and theta resolved.
struct RunContext {
  ConfigValues cfg;
  CircleMap map;
  double theta = 0.0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  NoiseQuadrature quadrature() const { return quadrature_from_config(cfg, theta); }
};

inline KoopmanOptions koopman_options(const ConfigValues& c) {
  KoopmanOptions o;
  o.grid_n = c.count("grid.n");
  o.tol = c.real("power_iter.tol");
  o.max_iter = c.count("power_iter.max_iter");
  require(is_valid_grid_size(o.grid_n), ErrorCode::config, "grid.n must be a power of two >= 256");
  return o;
}

inline PreflightOptions preflight_options(const ConfigValues& c) {
  PreflightOptions o;
  o.h2_grid = c.count("preflight.h2_grid");
  o.h2_k_max = c.count("preflight.h2_k_max");
  o.h4_grid = c.count("preflight.h4_grid");
  o.h4_delta_tol = c.real("preflight.h4_delta_tol");
  o.h4_c_min = c.real("preflight.h4_c_min");
  o.h5_grid = c.count("preflight.h5_grid");
  o.h5_a_grid = c.count("preflight.h5_a_grid");
  o.h5_tol = c.real("preflight.h5_tol");
  return o;
}

inline RunContext make_context(ConfigValues cfg) {
  koopman_options(cfg);
  parse_quadrature_kind(cfg.text("quadrature.kind"));
  RunContext ctx{cfg, map_from_config(cfg)};
  ctx.seed = cfg.count("run.seed");
  ctx.workers = std::max<std::size_t>(1, cfg.count("run.workers"));
  if (cfg.has("noise.tune_zero")) {
    const auto b = cfg.list("noise.tune_zero");
    require(b.size() == 2 && b[0] > 0.0 && b[0] < b[1] && b[1] <= 0.5, ErrorCode::config,
            "noise.tune_zero must be 'lo,hi' with 0 < lo < hi <= 0.5");
    ctx.theta = zero_exponent_theta(ctx.map, b[0], b[1], cfg.count("quadrature.n"), cfg.count("grid.n"));
  } else {
    ctx.theta = cfg.real("noise.theta");
  }
  require(ctx.theta > 0.0 && ctx.theta <= 0.5, ErrorCode::config, "noise.theta must lie in (0, 0.5]");
  return ctx;
}

/// (map, theta) points an experiment touches; sweeps expand their grid.
struct SweepPoint {
  CircleMap map;
  double theta;
};

inline std::vector<SweepPoint> sweep_points(const RunContext& ctx, bool sweep) {
  if (!sweep) return {{ctx.map, ctx.theta}};
  const ConfigValues& c = ctx.cfg;
  require(c.has("sweep.theta") || c.has("sweep.nu"), ErrorCode::config, "sweep needs sweep.theta and/or sweep.nu");
  std::vector<CircleMap> maps{ctx.map};
  if (c.has("sweep.nu")) {
    require(ctx.map.family() == MapFamily::example_nu, ErrorCode::config, "sweep.nu needs map.family = example_nu");
    maps.clear();
    for (double nu : c.list("sweep.nu")) maps.push_back(CircleMap::example_nu(nu));
  }
  const std::vector<double> thetas = c.has("sweep.theta") ? c.list("sweep.theta") : std::vector<double>{ctx.theta};
  std::vector<SweepPoint> out;
  for (const auto& m : maps)
    for (double th : thetas) out.push_back({m, th});
  return out;
}

struct GateResult {
  ojson reports = ojson::array();
  bool pass = true;
  std::string hash;
};

/// Runs the hypothesis checks at every point of the experiment.
inline GateResult preflight_gate(const RunContext& ctx, bool sweep) {
  GateResult g;
  const PreflightOptions o = preflight_options(ctx.cfg);
  for (const auto& p : sweep_points(ctx, sweep)) {
    const HypothesisReport r = preflight(p.map, p.theta, o);
    ojson j;
    j["family"] = to_string(p.map.family());
    j["params"] = p.map.params();
    j["theta"] = p.theta;
    j["report"] = r.to_json();
    g.reports.push_back(j);
    g.pass = g.pass && r.all_pass();
  }
  g.hash = sha256_hex(g.reports.dump());
  return g;
}

inline std::string nu_field(const CircleMap& m) {
  return m.family() == MapFamily::example_nu ? format_double(m.params()[0]) : std::string();
}

inline void run_preflight(const RunContext& ctx, const GateResult& gate, RunOutputs& out) {
  (void)ctx;
  out.json("preflight.json", gate.reports.size() == 1 ? gate.reports[0] : gate.reports);
}

/// One Birkhoff estimate per (nu, theta) point; each point has its own split stream.
inline void run_lyapunov_sweep(const RunContext& ctx, bool sweep, RunOutputs& out) {
  const auto pts = sweep_points(ctx, sweep);
  const std::size_t n = ctx.cfg.count("lyapunov.n");
  std::optional<std::size_t> burn;
  if (ctx.cfg.has("lyapunov.burn_in")) burn = ctx.cfg.count("lyapunov.burn_in");
  const auto streams = NoiseStream(0.5, ctx.seed).split(pts.size());
  const auto est = parallel_map(pts.size(), ctx.workers, [&](std::size_t i) {
    NoiseStream s = streams[i].with_theta(pts[i].theta);
    return lyapunov_birkhoff(pts[i].map, s, std::nullopt, n, burn);
  });
  CsvWriter w("lyapunov");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w << to_string(pts[i].map.family()) << nu_field(pts[i].map) << pts[i].theta << std::uint64_t{n} << ctx.seed
      << est[i].lambda_hat << est[i].stderr_;
    w.end_row();
  }
  out.csv("lyapunov.csv", w);
}

/// Distance series d_k = d(x_k, y_k), one file per series, plus an optional trichotomy summary.
inline void run_two_point_series(const RunContext& ctx, RunOutputs& out) {
  const ConfigValues& c = ctx.cfg;
  const std::size_t n = c.count("two_point.n");
  const std::size_t series = std::max<std::uint64_t>(1, c.count("two_point.seeds"));
  const std::size_t stride = std::max<std::uint64_t>(1, c.count("two_point.stride"));
  const double window = c.real("two_point.window");
  require(c.has("two_point.x0") == c.has("two_point.y0"), ErrorCode::config, "give both two_point.x0 and y0 or neither");
  const auto streams = NoiseStream(ctx.theta, ctx.seed).split(series + 1);
  const auto runs = parallel_map(series, ctx.workers, [&](std::size_t i) {
    NoiseStream s = streams[i];
    double x0 = 0.0, y0 = 0.0;
    if (c.has("two_point.x0")) {
      x0 = c.real("two_point.x0");
      y0 = c.real("two_point.y0");
    } else {
      x0 = s.next_unit();
      y0 = s.next_unit();
      if (circle_distance(x0, y0) == 0.0) y0 = wrap01(x0 + 0.25);
    }
    return distance_series(ctx.map, s, x0, y0, n, window);
  });
  ojson summary;
  summary["theta"] = ctx.theta;
  summary["series"] = ojson::array();
  for (std::size_t i = 0; i < series; ++i) {
    const DistanceSeries& ds = runs[i];
    CsvWriter w("distance_series");
    for (std::size_t k = 0; k < ds.d.size(); k += stride) {
      w << std::uint64_t{k} << ds.d[k];
      w.end_row();
    }
    const std::string name = series == 1 ? "distance_series.csv" : "distance_series_" + std::to_string(i) + ".csv";
    out.csv(name, w);
    if (ds.hit_diagonal) out.flag("ORBIT_MERGED " + name + " k=" + std::to_string(ds.merged_at));
    summary["series"].push_back({{"file", name},
                                 {"time_avg", ds.time_avg},
                                 {"tail_min", ds.tail_min},
                                 {"tail_max", ds.tail_max},
                                 {"merged", ds.hit_diagonal}});
  }
  if (const std::size_t ens = c.count("two_point.ensemble"); ens > 0) {
    TrichotomyOptions opt;
    opt.window_frac = window;
    const TrichotomyReport r = trichotomy_report(ctx.map, ctx.theta, n, ens, ctx.seed + 1, ctx.workers, opt);
    summary["trichotomy"] = {{"regime", to_string(r.regime)},
                             {"lambda_hat", r.lambda_hat},
                             {"stderr", r.stderr_},
                             {"mean_time_avg", r.mean_time_avg},
                             {"max_tail_max", r.max_tail_max},
                             {"max_tail_min", r.max_tail_min},
                             {"limsup_votes", r.limsup_votes},
                             {"ensemble", r.runs.size()}};
  }
  out.json("two_point_summary.json", summary);
}

/// Density of the pushforward of Lebesgue measure: sum of 1/DT over preimages.
inline double pushforward_density(const CircleMap& map, double y) {
  double s = 0.0;
  for (double z : map.preimages(y)) s += 1.0 / map.deriv(z);
  return s;
}

struct DensityComparison {
  GridFunction rho;
  std::vector<double> hist;  // orbit histogram density per uniform bin
  double l1_hist = 0.0;
  double sup_pushforward = 0.0;
};

/// Spectral stationary density against a long-orbit histogram and the pushforward formula.
inline DensityComparison compare_density(const CircleMap& map, const NoiseQuadrature& quad, double tol,
                                         std::size_t grid_n, NoiseStream stream, std::uint64_t orbit_n,
                                         std::size_t bins, std::size_t max_iter = 5000) {
  require(bins >= 2 && orbit_n >= 1000, ErrorCode::precondition, "density histogram needs bins >= 2, orbit_n >= 1000");
  DensityComparison d;
  d.rho = stationary_density(map, quad, tol, grid_n, max_iter);
  for (std::size_t i = 0; i < grid_n; ++i)
    d.sup_pushforward = std::max(d.sup_pushforward, std::fabs(d.rho[i] - pushforward_density(map, d.rho.node(i))));
  std::vector<std::uint64_t> counts(bins, 0);
  double x = stream.next_unit();
  for (int k = 0; k < 1000; ++k) x = step(map, x, stream.next());
  for (std::uint64_t k = 0; k < orbit_n; ++k) {
    ++counts[std::min(bins - 1, static_cast<std::size_t>(x * static_cast<double>(bins)))];
    x = step(map, x, stream.next());
  }
  const PeriodicSpline sp(d.rho.values);
  const ReferenceRule g4 = gauss_legendre_rule(4);
  const double w = 1.0 / static_cast<double>(bins);
  for (std::size_t j = 0; j < bins; ++j) {
    const double h = static_cast<double>(counts[j]) / static_cast<double>(orbit_n) / w;
    d.hist.push_back(h);
    double avg = 0.0;
    for (std::size_t k = 0; k < g4.nodes.size(); ++k)
      avg += 0.5 * g4.weights[k] * sp(w * (static_cast<double>(j) + 0.5 + 0.5 * g4.nodes[k]));
    d.l1_hist += std::fabs(avg - h) * w;
  }
  return d;
}

inline void run_density(const RunContext& ctx, RunOutputs& out) {
  const ConfigValues& c = ctx.cfg;
  const KoopmanOptions ko = koopman_options(c);
  const DensityComparison d =
      compare_density(ctx.map, ctx.quadrature(), c.real("density.tol"), ko.grid_n, NoiseStream(ctx.theta, ctx.seed),
                      c.count("density.orbit_n"), c.count("density.bins"), ko.max_iter);
  CsvWriter w("density");
  for (std::size_t i = 0; i < d.rho.size(); ++i) {
    const double x = d.rho.node(i);
    w << x << d.rho[i];
    w.end_row();
  }
  out.csv("density.csv", w);
  CsvWriter h("density_hist");
  const double bw = 1.0 / static_cast<double>(d.hist.size());
  for (std::size_t j = 0; j < d.hist.size(); ++j) {
    h << bw * static_cast<double>(j) << bw * static_cast<double>(j + 1) << d.hist[j];
    h.end_row();
  }
  out.csv("density_hist.csv", h);
  out.json("density_summary.json", {{"theta", ctx.theta},
                                    {"integral", d.rho.integral()},
                                    {"l1_orbit_histogram", d.l1_hist},
                                    {"sup_pushforward", ctx.theta == 0.5 ? ojson(d.sup_pushforward) : ojson(nullptr)}});
}

inline ojson moment_summary_json(const MomentCurve& mc, std::optional<double> gamma, SpectralSolver& solver,
                                 double theta) {
  ojson j = {{"theta", theta}, {"lambda0", mc.lambda0}, {"V", mc.V}, {"gamma", nullptr}, {"Lambda_at_gamma", nullptr}};
  if (gamma) {
    j["gamma"] = *gamma;
    j["Lambda_at_gamma"] = *gamma == 0.0 ? 0.0 : solver.lambda(*gamma);
  }
  j["max_convexity_defect"] = mc.max_convexity_defect;
  j["max_lower_bound_defect"] = mc.max_lower_bound_defect;
  return j;
}

/// gamma, or nothing (with a NO_BRACKET flag) when Lambda has no second root.
inline std::optional<double> try_gamma(SpectralSolver& solver, const MomentCurve& mc, RunOutputs& out) {
  try {
    return gamma_root(solver, mc);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::no_bracket) throw;
    out.flag("NO_BRACKET gamma");
    return std::nullopt;
  }
}

/// Moment curve on the configured q grid, gamma, and Monte Carlo cross-checks.
inline void run_moment_report(const RunContext& ctx, RunOutputs& out) {
  const ConfigValues& c = ctx.cfg;
  SpectralSolver solver(ctx.map, ctx.quadrature(), koopman_options(c));
  const MomentCurve mc = moment_curve(solver, c.list("moment.q_grid"));
  CsvWriter w("moment");
  for (std::size_t i = 0; i < mc.q_grid.size(); ++i) {
    const double q = mc.q_grid[i];
    w << q << mc.Lambda[i] << solver.eig(q == 0.0 ? 0.0 : -q).residual;
    w.end_row();
  }
  out.csv("moment.csv", w);

  const auto mc_q = c.list("moment.mc_q");
  const std::size_t n = c.count("moment.mc_n"), ens = c.count("moment.mc_ensemble");
  CsvWriter m("moment_mc");
  for (std::size_t i = 0; i < mc_q.size(); ++i) {
    const McEstimate e = moment_lyapunov_mc(ctx.map, ctx.theta, ctx.seed + 1 + i, mc_q[i], n, ens, ctx.workers);
    m << mc_q[i] << solver.lambda(mc_q[i]) << e.estimate << e.stderr_ << std::uint64_t{n} << std::uint64_t{ens};
    m.end_row();
  }
  out.csv("moment_mc.csv", m);

  ojson j = moment_summary_json(mc, try_gamma(solver, mc, out), solver, ctx.theta);
  if (const std::size_t vn = c.count("moment.variance_n"); vn > 0) {
    const McEstimate v =
        variance_mc(ctx.map, ctx.theta, ctx.seed + 1000, vn, c.count("moment.variance_ensemble"), ctx.workers);
    j["V_mc"] = v.estimate;
    j["V_mc_stderr"] = v.stderr_;
  }
  out.json("moment_summary.json", j);
}

/// lambda0, V and gamma at each (nu, theta) point.
inline void run_gamma(const RunContext& ctx, bool sweep, RunOutputs& out) {
  const auto pts = sweep_points(ctx, sweep);
  const KoopmanOptions ko = koopman_options(ctx.cfg);
  CsvWriter w("gamma");
  for (const auto& p : pts) {
    SpectralSolver solver(p.map, quadrature_from_config(ctx.cfg, p.theta), ko);
    const MomentCurve mc = moment_curve(solver, {-0.1, -0.05, 0.0, 0.05, 0.1});
    const auto g = try_gamma(solver, mc, out);
    w << to_string(p.map.family()) << nu_field(p.map) << p.theta << mc.lambda0 << mc.V;
    if (g) w << *g << (*g == 0.0 ? 0.0 : solver.lambda(*g));
    else w << "" << "";
    w.end_row();
  }
  out.csv("gamma.csv", w);
}

inline void write_passage_rows(CsvWriter& w, const PassageEnsemble& e) {
  for (const auto& s : e.samples) {
    w << e.epsilon << e.delta << e.d0 << e.seed;
    w << (s.tau_minus ? std::to_string(*s.tau_minus) : std::string());
    w << (s.tau_plus ? std::to_string(*s.tau_plus) : std::string());
    w << to_string(s.first) << (s.first == FirstEvent::censored ? 1 : 0);
    w.end_row();
  }
}

inline void write_cell(CsvWriter& w, std::string_view design, const PassageEnsemble& e) {
  w << design << e.epsilon << e.delta << e.d0 << std::uint64_t{e.samples.size()} << std::uint64_t{e.minus}
    << std::uint64_t{e.plus} << std::uint64_t{e.censored} << e.p_minus_hat << e.p_minus_ci.lo << e.p_minus_ci.hi
    << e.mean_min_stop << e.mean_min_stop_se;
  w.end_row();
}

/// A single passage ensemble from the configured (epsilon, delta, d0).
inline void run_passage_ensemble(const RunContext& ctx, RunOutputs& out) {
  const ConfigValues& c = ctx.cfg;
  const PassageEnsemble e =
      passage_ensemble(ctx.map, ctx.theta, ctx.seed, c.real("passage.epsilon"), c.real("passage.delta"),
                       c.real("passage.d0"), c.count("passage.count"), c.count("passage.max_iter"), ctx.workers);
  CsvWriter w("passage");
  write_passage_rows(w, e);
  out.csv("passage.csv", w);
  CsvWriter cells("passage_cells");
  write_cell(cells, "ensemble", e);
  out.csv("passage_cells.csv", cells);
  if (e.censored_fraction >= 0.01) out.flag("CENSORED_FRACTION " + format_double(e.censored_fraction));
}

/// Verification designs chosen by the sign of the spectral exponent.
inline void run_passage_report(const RunContext& ctx, RunOutputs& out) {
  const ConfigValues& c = ctx.cfg;
  const NoiseQuadrature quad = ctx.quadrature();
  SpectralSolver solver(ctx.map, quad, koopman_options(c));
  const MomentCurve mc = moment_curve(solver, {-0.1, -0.05, 0.0, 0.05, 0.1});
  const std::uint64_t max_iter = c.count("passage.max_iter");
  const std::size_t count = c.count("passage.count");
  ojson j = moment_summary_json(mc, std::nullopt, solver, ctx.theta);
  CsvWriter cells("passage_cells");
  if (std::fabs(mc.lambda0) < 0.01) {
    ZeroExponentDesign d;
    d.deltas = c.list("passage.zero_deltas");
    d.log_bands = c.list("passage.zero_log_bands");
    d.fractions = c.list("passage.zero_fractions");
    d.count = count;
    d.max_iter = max_iter;
    const ZeroExponentReport r = verify_zero_exponent_bounds(ctx.map, ctx.theta, ctx.seed, d, ctx.workers);
    for (const auto& e : r.cells) write_cell(cells, "zero", e);
    j["regime"] = "zero";
    j["slope"] = r.p_fit.slope;
    j["intercept"] = r.p_fit.intercept;
    j["K_fit"] = r.K_fit;
    j["envelope"] = r.envelope;
    j["stop_coeff"] = r.stop_coeff;
    j["stop_coeff_times_V"] = r.stop_coeff * mc.V;
    j["max_censored"] = r.max_censored;
    j["p_monotone"] = r.p_monotone;
    const double delta = d.deltas.front();
    const EscapeTrend t = escape_time_trend(ctx.map, ctx.theta, ctx.seed + 17, delta * std::exp(-4.0), delta,
                                            {1000, 10000, 100000}, 1000, ctx.workers);
    j["escape_trend"] = {{"budgets", t.budgets}, {"truncated_mean", t.truncated_mean},
                         {"escaped_fraction", t.escaped_fraction}};
  } else if (mc.lambda0 > 0.0) {
    const double gamma = gamma_root(solver, mc);
    j["gamma"] = gamma;
    j["Lambda_at_gamma"] = solver.lambda(gamma);
    const double delta = c.real("passage.delta");
    std::vector<double> d0s;
    for (double r : c.list("passage.escape_log_ratios")) d0s.push_back(delta * std::exp(-r));
    const EscapeReport esc = escape_time_positive(ctx.map, ctx.theta, ctx.seed, d0s, delta, count, max_iter, ctx.workers);
    CsvWriter ew("escape");
    for (std::size_t i = 0; i < esc.d0.size(); ++i) {
      ew << delta << esc.d0[i] << esc.mean_tau[i] << esc.stderr_[i];
      ew.end_row();
    }
    out.csv("escape.csv", ew);
    const double d0 = delta * std::exp(-c.real("passage.tail_log_d0"));
    std::vector<double> eps;
    for (double r : c.list("passage.tail_log_eps")) eps.push_back(d0 * std::exp(-r));
    const TailReport tail = verify_positive_exponent_tail(ctx.map, ctx.theta, ctx.seed + 1, d0, delta, eps,
                                                          c.count("passage.tail_count"), c.real("passage.kappa"),
                                                          max_iter, ctx.workers);
    for (const auto& e : tail.cells) write_cell(cells, "tail", e);
    j["regime"] = "positive";
    j["escape_slope"] = esc.fit.slope;
    j["escape_slope_times_lambda0"] = esc.fit.slope * mc.lambda0;
    j["escape_censored_fraction"] = esc.censored_fraction;
    j["tail_exponent"] = tail.fit.slope;
    j["tail_relative_error"] = std::fabs(tail.fit.slope - gamma) / std::fabs(gamma);
    j["tail_exponent_se"] = tail.fit.slope_se;
    j["tail_K_fit"] = tail.K_fit;
    j["tail_decreasing"] = tail.decreasing;
  } else {
    throw Error(ErrorCode::precondition, "passage report covers zero and positive exponents only");
  }
  out.csv("passage_cells.csv", cells);
  out.json("passage_report.json", j);
}

inline std::vector<double> default_excursion_eps() {
  std::vector<double> e;
  for (int k = 0; k <= 12; ++k) e.push_back(std::pow(10.0, -4.0 - 0.5 * k));
  return e;
}

inline void write_histogram(const DistanceHistogram& h, RunOutputs& out) {
  CsvWriter w("histogram");
  w << 0.0 << h.edges.front() << h.below;
  w.end_row();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    w << h.edges[i] << h.edges[i + 1] << h.counts[i];
    w.end_row();
  }
  out.csv("histogram.csv", w);
}

inline DistanceHistogram histogram_from_config(const RunContext& ctx) {
  const ConfigValues& c = ctx.cfg;
  NoiseStream s(ctx.theta, ctx.seed);
  return distance_histogram(ctx.map, s, c.count("measure.hist_n"), c.real("measure.eps_min"), c.count("measure.bins"));
}

/// Orbit distance histogram with the density exponent fit.
inline void run_dist_hist(const RunContext& ctx, RunOutputs& out) {
  const DistanceHistogram h = histogram_from_config(ctx);
  write_histogram(h, out);
  const ExponentFit f = density_exponent_fit(h, ctx.cfg.real("measure.fit_lo"), ctx.cfg.real("measure.fit_hi"));
  out.json("dist_hist.json", {{"theta", ctx.theta},
                              {"total", h.total},
                              {"below_eps_min", h.below},
                              {"density_exponent", f.exponent},
                              {"density_exponent_stderr", f.stderr_},
                              {"r2", f.r2}});
}

/// Excursion growth fit near a zero exponent, diagonal mass fit for a positive one.
inline void run_measure_growth(const RunContext& ctx, RunOutputs& out) {
  const ConfigValues& c = ctx.cfg;
  SpectralSolver solver(ctx.map, ctx.quadrature(), koopman_options(c));
  const MomentCurve mc = moment_curve(solver, {-0.1, -0.05, 0.0, 0.05, 0.1});
  std::string regime = c.text("measure.regime");
  require(regime == "auto" || regime == "zero" || regime == "positive", ErrorCode::config,
          "measure.regime must be auto, zero or positive");
  if (regime == "auto") regime = std::fabs(mc.lambda0) < 0.01 ? "zero" : "positive";
  ojson j = moment_summary_json(mc, std::nullopt, solver, ctx.theta);
  j["regime"] = regime;
  if (regime == "zero") {
    const auto eps = c.has("measure.eps") ? c.list("measure.eps") : default_excursion_eps();
    const double delta = c.real("measure.delta"), kappa = c.real("measure.kappa");
    const std::size_t m = c.count("measure.excursions");
    const std::uint64_t max_iter = c.count("measure.max_iter");
    const ExcursionStats st = excursion_counts(ctx.map, ctx.theta, ctx.seed, delta, kappa, eps, m, max_iter, ctx.workers);
    CsvWriter w("excursion");
    for (std::size_t i = 0; i < st.excursions(); ++i)
      for (std::size_t k = 0; k < st.eps_grid.size(); ++k) {
        w << std::uint64_t{i} << st.eps_grid[k] << st.counts[i][k];
        w.end_row();
      }
    out.csv("excursion.csv", w);
    const GrowthFit g = log_growth_fit(st, 0.0, 1.0, 1000, ctx.seed);
    const ExcursionStats st2 =
        excursion_counts(ctx.map, ctx.theta, ctx.seed + 1, delta, kappa, eps, 2 * m, max_iter, ctx.workers);
    const GrowthFit g2 = log_growth_fit(st2, 0.0, 1.0, 1000, ctx.seed + 1);
    j["slope"] = g.slope;
    j["intercept"] = g.intercept;
    j["r2"] = g.r2;
    j["ci"] = {g.ci.lo, g.ci.hi};
    j["censored_fraction"] = st.censored_fraction();
    j["doubled_budget_slope"] = g2.slope;
    j["doubled_budget_ratio"] = g2.slope / g.slope;
  } else {
    const double gamma = gamma_root(solver, mc);
    j["gamma"] = gamma;
    j["Lambda_at_gamma"] = solver.lambda(gamma);
    const DistanceHistogram h = histogram_from_config(ctx);
    write_histogram(h, out);
    const ExponentFit f = diagonal_mass_fit(h, gamma, c.real("measure.fit_lo"), c.real("measure.fit_hi"));
    j["mass_exponent"] = f.exponent;
    j["mass_exponent_stderr"] = f.stderr_;
    j["ci"] = {f.ci.lo, f.ci.hi};
    j["r2"] = f.r2;
    j["abs_error_vs_gamma"] = std::fabs(f.exponent - std::fabs(gamma));
  }
  out.json("growth.json", j);
}

}  // namespace rds
