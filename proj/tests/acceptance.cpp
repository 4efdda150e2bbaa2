// Acceptance suite: one PASS/FAIL line per criterion. Runtime budgets are part
// of each criterion. Usage: acceptance <rds_cli> <work dir> <configs dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "rds/rds.hpp"

using namespace rds;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string g_cli;
fs::path g_work;
fs::path g_configs;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

/// Runs the CLI with the given arguments; returns the exit status.
int cli(const std::string& args) {
  const std::string cmd = quote(g_cli) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const fs::path& p) { return json::parse(read_file(p.string())); }

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::istringstream in(read_file(p.string()));
  std::string line;
  std::getline(in, line);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    const auto f = split(line);
    std::map<std::string, std::string> r;
    for (std::size_t i = 0; i < header.size() && i < f.size(); ++i) r[header[i]] = f[i];
    rows.push_back(r);
  }
  return rows;
}

double num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

bool within(double v, double target, double tol) { return std::fabs(v - target) <= tol; }

const CircleMap kMap = CircleMap::example_nu(0.6);

/// Birkhoff estimates shared by several criteria.
struct Birkhoff {
  LyapunovEstimate at_02;
  LyapunovEstimate at_017;
};
Birkhoff g_birkhoff;

LyapunovEstimate birkhoff(double theta, std::uint64_t seed, std::size_t n = 10000000) {
  NoiseStream s(theta, seed);
  return lyapunov_birkhoff(kMap, s, std::nullopt, n);
}

Outcome lyapunov_endpoints() {
  const fs::path out = g_work / "theta_sweep";
  if (cli("sweep --config " + quote((g_configs / "theta_sweep.ini").string()) + " --out " + quote(out.string())) != 0)
    return {false, "sweep subcommand failed"};
  const auto rows = read_csv(out / "lyapunov.csv");
  if (rows.size() != 9) return {false, "expected 9 sweep rows"};
  std::vector<double> th, lam, se;
  for (const auto& r : rows) {
    th.push_back(num(r.at("theta")));
    lam.push_back(num(r.at("lambda_hat")));
    se.push_back(num(r.at("stderr")));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < lam.size(); ++i)
    if (lam[i] < lam[i - 1] - 2 * std::max(se[i], se[i - 1])) monotone = false;
  const bool lo = th.front() == 0.1 && within(lam.front(), -0.40, 0.05);
  const bool hi = th.back() == 0.5 && within(lam.back(), 0.45, 0.05);
  return {lo && hi && monotone, "lambda(0.1)=" + fmt(lam.front(), 5) + " [-0.40+-0.05] lambda(0.5)=" +
                                    fmt(lam.back(), 5) + " [0.45+-0.05] monotone=" + (monotone ? "yes" : "no")};
}

Outcome spot_values() {
  g_birkhoff.at_02 = birkhoff(0.2, 202);
  g_birkhoff.at_017 = birkhoff(0.17, 217);
  const double a = g_birkhoff.at_02.lambda_hat, b = g_birkhoff.at_017.lambda_hat;
  return {within(a, 0.11, 0.02) && std::fabs(b) <= 0.02,
          "lambda(0.2)=" + fmt(a, 5) + " [0.11+-0.02] lambda(0.17)=" + fmt(b, 3) + " [|.|<=0.02]"};
}

Outcome affine_oracle() {
  const CircleMap m = CircleMap::affine_doubling();
  NoiseStream s(0.2, 3);
  const double lam = lyapunov_birkhoff(m, s, std::nullopt, 1000000).lambda_hat;
  SpectralSolver solver(m, NoiseQuadrature(0.2, 96));
  const MomentCurve c = moment_curve(solver, {-2, -1, -0.5, 0, 0.5, 1, 2});
  double worst = 0.0;
  for (std::size_t i = 0; i < c.q_grid.size(); ++i)
    worst = std::max(worst, std::fabs(c.Lambda[i] - c.q_grid[i] * std::log(2.0)));
  const bool ok = std::fabs(lam - std::log(2.0)) <= 1e-12 && worst <= 1e-8 && std::fabs(c.V) <= 1e-6;
  return {ok, "|lambda-ln2|=" + fmt(std::fabs(lam - std::log(2.0)), 2) + " max|Lambda-q ln2|=" + fmt(worst, 2) +
                  " V=" + fmt(c.V, 2)};
}

Outcome spectral_consistency() {
  const NoiseQuadrature quad(0.2, 96);
  SpectralSolver solver(kMap, quad);
  MomentCurve c;
  try {
    c = moment_curve(solver, {-2, -1, -0.5, -0.25, -0.1, -0.05, 0, 0.05, 0.1, 0.25, 0.5, 1});
  } catch (const Error& e) {
    return {false, e.what()};
  }
  const double l0 = solver.lambda(0.0);
  const LyapunovEstimate& b = g_birkhoff.at_02;
  const double birk_tol = std::max(3 * b.stderr_, 5e-3);
  const bool birk_ok = std::fabs(c.lambda0 - b.lambda_hat) <= birk_tol;

  double worst_z = 0.0;
  std::uint64_t seed = 400;
  for (double q : {-1.0, -0.5, 0.5, 1.0}) {
    const McEstimate e = moment_lyapunov_mc(kMap, 0.2, ++seed, q, 24, 1000000);
    worst_z = std::max(worst_z, std::fabs(e.estimate - solver.lambda(q)) / e.stderr_);
  }

  double eigen = 0.0;
  for (double q : {-1.0, -0.5, 0.5, 1.0})
    eigen = std::max(eigen, eigen_identity_residual(kMap, quad, q, solver.eig(q), {0.25, 1.0, 4.0}, 4));

  double doubling = 0.0;
  KoopmanOptions o2, o4;
  o2.grid_n = 2048;
  o4.grid_n = 4096;
  for (double q : {-1.0, -0.5, 0.5, 1.0})
    doubling = std::max(doubling, std::fabs(moment_lyapunov(kMap, quad, q, o2) - moment_lyapunov(kMap, quad, q, o4)));

  const bool ok = std::fabs(l0) <= 1e-10 && c.max_convexity_defect >= 0.0 && c.max_lower_bound_defect >= -1e-8 &&
                  birk_ok && worst_z <= 3.0 && eigen <= 1e-8 && doubling <= 1e-8;
  return {ok, "Lambda(0)=" + fmt(l0, 2) + " convexity_defect=" + fmt(c.max_convexity_defect, 2) +
                  " lower_bound_defect=" + fmt(c.max_lower_bound_defect, 2) + " |lambda0-birkhoff|=" +
                  fmt(std::fabs(c.lambda0 - b.lambda_hat), 2) + " [<=" + fmt(birk_tol, 2) + "] MC max z=" +
                  fmt(worst_z, 3) + " eigen=" + fmt(eigen, 2) + " doubling=" + fmt(doubling, 2)};
}

Outcome full_noise_density() {
  const DensityComparison d =
      compare_density(kMap, NoiseQuadrature(0.5, 256), 1e-12, 1024, NoiseStream(0.5, 505), 10000000, 256);
  return {d.sup_pushforward <= 1e-6 && d.l1_hist < 0.02,
          "sup|rho-pushforward|=" + fmt(d.sup_pushforward, 3) + " [<=1e-6] L1(histogram)=" + fmt(d.l1_hist, 3) +
              " [<0.02]"};
}

Outcome zero_exponent_passage() {
  const fs::path out = g_work / "passage_zero";
  if (cli("passage --config " + quote((g_configs / "passage_zero.ini").string()) + " --out " + quote(out.string())) !=
      0)
    return {false, "passage report failed"};
  const json j = read_json(out / "passage_report.json");
  const double theta = j["theta"], slope = j["slope"], cv = j["stop_coeff_times_V"], cens = j["max_censored"];
  const LyapunovEstimate b = birkhoff(theta, 606);
  const bool ok = std::fabs(b.lambda_hat) < 0.01 && slope >= 0.9 && slope <= 1.1 && within(cv, 1.0, 0.25) &&
                  cens < 0.01;
  return {ok, "theta=" + fmt(theta, 6) + " birkhoff=" + fmt(b.lambda_hat, 2) + " slope=" + fmt(slope) +
                  " [0.9,1.1] stop_coeff*V=" + fmt(cv) + " [1+-0.25] censored=" + fmt(cens, 2) + " [<0.01]"};
}

Outcome positive_passage() {
  const fs::path out = g_work / "passage_positive";
  if (cli("passage --config " + quote((g_configs / "passage_positive.ini").string()) + " --out " +
          quote(out.string())) != 0)
    return {false, "passage report failed"};
  const json j = read_json(out / "passage_report.json");
  const double slope = j["escape_slope"], rel = j["tail_relative_error"], tail = j["tail_exponent"];
  const double gamma = j["gamma"];
  const double ratio = slope * g_birkhoff.at_02.lambda_hat;
  return {within(ratio, 1.0, 0.15) && rel <= 0.2,
          "escape_slope*lambda_hat=" + fmt(ratio) + " [1+-0.15] tail_exponent=" + fmt(tail) + " gamma=" +
              fmt(gamma) + " rel_err=" + fmt(rel, 3) + " [<=0.2]"};
}

Outcome measure_growth() {
  const fs::path zero = g_work / "growth_zero", pos = g_work / "growth_positive";
  if (cli("measure-growth --config " + quote((g_configs / "growth_zero.ini").string()) + " --out " +
          quote(zero.string())) != 0)
    return {false, "zero-regime measure-growth failed"};
  if (cli("measure-growth --config " + quote((g_configs / "growth_positive.ini").string()) + " --out " +
          quote(pos.string())) != 0)
    return {false, "positive-regime measure-growth failed"};
  const json z = read_json(zero / "growth.json"), p = read_json(pos / "growth.json");
  const double slope = z["slope"], lo = z["ci"][0], hi = z["ci"][1], ratio = z["doubled_budget_ratio"];
  const double gamma = p["gamma"], err = p["abs_error_vs_gamma"], mass = p["mass_exponent"];
  const bool zero_ok = z["regime"] == "zero" && slope > 0 && lo > 0 && within(ratio, 1.0, 0.25);
  const bool pos_ok = p["regime"] == "positive" && gamma > -0.5 && gamma < 0 && err <= 0.1;
  return {zero_ok && pos_ok, "zero: slope=" + fmt(slope) + " CI=[" + fmt(lo) + "," + fmt(hi) + "] doubling ratio=" +
                                 fmt(ratio) + " [1+-0.25]; positive: mass exponent=" + fmt(mass) + " |gamma|=" +
                                 fmt(std::fabs(gamma)) + " err=" + fmt(err, 3) + " [<=0.1]"};
}

Outcome trichotomy() {
  const std::size_t n = 1000000;
  const TrichotomyReport a = trichotomy_report(kMap, 0.1, n, 32, 901);
  const TrichotomyReport b = trichotomy_report(kMap, 0.17, n, 32, 902);
  const TrichotomyReport c = trichotomy_report(kMap, 0.2, n, 32, 903);
  double chaotic_min_avg = 1.0;
  for (const auto& r : c.runs) chaotic_min_avg = std::min(chaotic_min_avg, r.time_avg);
  const bool ok = a.regime == Regime::synchronising && a.max_tail_max < 1e-6 &&
                  (b.regime == Regime::intermittent || b.regime == Regime::inconclusive) &&
                  c.regime == Regime::chaotic && c.max_tail_min < 1e-4 && chaotic_min_avg > 0.05;
  return {ok, "0.1:" + to_string(a.regime) + " (max tail " + fmt(a.max_tail_max, 2) + ") 0.17:" + to_string(b.regime) +
                  " (lambda " + fmt(b.lambda_hat, 2) + ") 0.2:" + to_string(c.regime) + " (max tail min " +
                  fmt(c.max_tail_min, 2) + ", min time avg " + fmt(chaotic_min_avg, 3) + ")"};
}

Outcome determinism() {
  struct Case {
    std::string sub, ini;
  };
  const std::vector<Case> cases = {
      {"sweep", "[sweep]\ntheta = 0.1,0.2,0.5\n[lyapunov]\nn = 1e6\n"},
      {"two-point", "[noise]\ntheta = 0.17\n[two_point]\nn = 20000\nstride = 10\nseeds = 3\nensemble = 32\n"},
      {"density", "[noise]\ntheta = 0.5\n[density]\norbit_n = 1e6\n"},
      {"moment", "[moment]\nq_grid = -1,-0.5,0,0.5,1\nmc_q = -1,1\nmc_ensemble = 1e5\nvariance_n = 200\n"
                 "variance_ensemble = 2000\n"},
      {"gamma", "[sweep]\ntheta = 0.2,0.25\n"},
      {"passage", "[passage]\nmode = ensemble\ncount = 4000\nepsilon = 1e-6\ndelta = 1e-2\nd0 = 1e-4\n"},
      {"measure-growth", "[noise]\ntune_zero = 0.15,0.2\n[measure]\nexcursions = 300\n"},
      {"dist-hist", "[measure]\nhist_n = 2e6\n"},
  };
  std::size_t compared = 0;
  for (const Case& c : cases) {
    const fs::path ini = g_work / ("det_" + c.sub + ".ini");
    std::ofstream(ini) << "[run]\nseed = 77\n" << c.ini;
    std::vector<std::pair<std::string, std::string>> sums[2];
    for (int i = 0; i < 2; ++i) {
      const std::string workers = i == 0 ? "1" : "8";
      const fs::path out = g_work / ("det_" + c.sub + "_w" + workers);
      if (cli(c.sub + " --config " + quote(ini.string()) + " --workers " + workers + " --out " + quote(out.string())) !=
          0)
        return {false, c.sub + " failed at " + workers + " workers"};
      const json manifest = read_json(out / "manifest.json");
      for (const auto& f : manifest["files"])
        if (f["schema"] != "json") sums[i].emplace_back(f["name"], f["sha256"]);
    }
    if (sums[0].empty() || sums[0] != sums[1]) return {false, c.sub + ": CSV checksums differ between 1 and 8 workers"};
    compared += sums[0].size();
  }
  return {true, std::to_string(compared) + " CSVs over " + std::to_string(cases.size()) +
                    " subcommands identical at 1 and 8 workers"};
}

Outcome preflight_controls() {
  const HypothesisReport good = preflight(kMap, 0.2);
  const HypothesisReport affine = preflight(CircleMap::affine_doubling(), 0.2);
  const bool ok = good.all_pass() && affine.h3.verdict == Verdict::fail && affine.h5.verdict == Verdict::fail;
  return {ok, "nu=0.6: " + std::string(good.all_pass() ? "all pass" : "fails") +
                  "; affine: H3 " + to_string(affine.h3.verdict) + ", H5 " + to_string(affine.h5.verdict)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <rds_cli> <work dir> <configs dir>\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  g_work = fs::absolute(argv[2]);
  g_configs = fs::absolute(argv[3]);
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"Lyapunov endpoints", 120, lyapunov_endpoints},
      {"Spot values", 60, spot_values},
      {"Exact-map oracle", 30, affine_oracle},
      {"Spectral consistency", 120, spectral_consistency},
      {"Full-noise density", 60, full_noise_density},
      {"Zero-exponent passage bounds", 600, zero_exponent_passage},
      {"Positive-exponent passage", 600, positive_passage},
      {"Measure growth", 900, measure_growth},
      {"Trichotomy", 300, trichotomy},
      {"Determinism", 1e9, determinism},
      {"Preflight", 60, preflight_controls},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt(secs, 3) + " s";
    if (c.budget_s < 1e9) {
      timing += " of " + fmt(c.budget_s, 4) + " s";
      if (secs > c.budget_s) {
        o.pass = false;
        o.detail += " (over the runtime budget)";
      }
    }
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.name << " (" << timing << "): " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
