// Config-driven experiment runner. Every invocation writes manifest.json into
// the output directory, including failed runs.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rds/rds.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kPreflight = 3, kNumerical = 4 };

int exit_code(rds::ErrorCode c) {
  using rds::ErrorCode;
  switch (c) {
    case ErrorCode::config:
    case ErrorCode::precondition:
    case ErrorCode::bad_band: return kConfig;
    case ErrorCode::fails_h1: return kPreflight;
    default: return kNumerical;
  }
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed, workers, count, max_iter;
  std::optional<std::string> out;
  std::optional<double> epsilon, delta, d0;
  bool force = false;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "experiment config (INI)")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "root seed (overrides run.seed)");
  sub->add_option("--workers", o.workers, "worker threads (overrides run.workers)");
  sub->add_option("--out", o.out, "output directory (overrides run.out)");
  sub->add_flag("--force", o.force, "run even if the hypothesis checks fail");
}

rds::ConfigValues effective_config(const Options& o) {
  rds::ConfigValues c = o.config.empty() ? rds::ConfigValues{} : rds::load_config(o.config);
  auto put = [&](const char* key, const auto& v) {
    if (v) c.set(key, rds::format_double(static_cast<double>(*v)));
  };
  if (o.seed) c.set("run.seed", std::to_string(*o.seed));
  if (o.workers) c.set("run.workers", std::to_string(*o.workers));
  if (o.count) c.set("passage.count", std::to_string(*o.count));
  if (o.max_iter) c.set("passage.max_iter", std::to_string(*o.max_iter));
  if (o.out) c.set("run.out", *o.out);
  put("passage.epsilon", o.epsilon);
  put("passage.delta", o.delta);
  put("passage.d0", o.d0);
  return c;
}

int run(const std::string& sub, const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  rds::ConfigValues cfg;
  try {
    cfg = effective_config(o);
  } catch (const rds::Error& e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  }
  rds::RunManifest m;
  m.subcommand = sub;
  m.config_hash = rds::sha256_hex(cfg.canonical());
  m.seed = cfg.count("run.seed");
  m.workers = cfg.count("run.workers");
  m.forced = o.force;
  std::optional<rds::RunOutputs> out;
  int code = kOk;
  try {
    out.emplace(cfg.text("run.out"));
    const rds::RunContext ctx = rds::make_context(cfg);
    const bool sweep = sub == "sweep" || (sub == "gamma" && (cfg.has("sweep.theta") || cfg.has("sweep.nu")));
    const rds::GateResult gate = rds::preflight_gate(ctx, sweep);
    m.hypothesis_hash = gate.hash;
    m.preflight_pass = gate.pass;
    if (sub == "preflight") {
      rds::run_preflight(ctx, gate, *out);
      code = gate.pass ? kOk : kPreflight;
    } else if (!gate.pass && !o.force) {
      rds::run_preflight(ctx, gate, *out);
      out->flag("PREFLIGHT_FAIL");
      std::cerr << "hypothesis checks failed (see preflight.json); rerun with --force to override\n";
      code = kPreflight;
    } else {
      const std::map<std::string, std::function<void()>> table = {
          {"lyapunov", [&] { rds::run_lyapunov_sweep(ctx, false, *out); }},
          {"sweep", [&] { rds::run_lyapunov_sweep(ctx, true, *out); }},
          {"two-point", [&] { rds::run_two_point_series(ctx, *out); }},
          {"density", [&] { rds::run_density(ctx, *out); }},
          {"moment", [&] { rds::run_moment_report(ctx, *out); }},
          {"gamma", [&] { rds::run_gamma(ctx, sweep, *out); }},
          {"passage",
           [&] {
             const std::string mode = cfg.text("passage.mode");
             if (mode == "ensemble") rds::run_passage_ensemble(ctx, *out);
             else if (mode == "report") rds::run_passage_report(ctx, *out);
             else throw rds::Error(rds::ErrorCode::config, "passage.mode must be ensemble or report");
           }},
          {"measure-growth", [&] { rds::run_measure_growth(ctx, *out); }},
          {"dist-hist", [&] { rds::run_dist_hist(ctx, *out); }},
      };
      table.at(sub)();
    }
  } catch (const rds::Error& e) {
    std::cerr << e.what() << "\n";
    if (out) out->flag(std::string(rds::to_string(e.code())));
    code = exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (out) out->flag("ERROR");
    code = kOther;
  }
  if (!out) return code;
  m.files = out->files();
  m.flags = out->flags();
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream mf(out->dir() / "manifest.json", std::ios::binary);
  mf << m.to_json().dump(2) << "\n";
  if (!mf.good()) {
    std::cerr << "cannot write manifest.json\n";
    return code == kOk ? kOther : code;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random circle endomorphisms: Lyapunov exponents, moment spectra, passage and occupation statistics"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"preflight", "check hypotheses H1-H5 and write the report"},
      {"lyapunov", "Birkhoff Lyapunov estimate at the configured point"},
      {"two-point", "distance series of two orbits under common noise"},
      {"density", "stationary density, orbit histogram and pushforward"},
      {"moment", "moment Lyapunov curve, gamma, V and Monte Carlo checks"},
      {"gamma", "lambda0, V and gamma (over the sweep grid if given)"},
      {"passage", "passage ensemble or verification report"},
      {"measure-growth", "occupation growth near the diagonal"},
      {"dist-hist", "orbit distance histogram"},
      {"sweep", "Lyapunov estimates over the sweep grid"},
  };
  for (const auto& [name, help] : subs) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, o);
    if (name == "passage") {
      sub->add_option("--epsilon", o.epsilon, "lower barrier");
      sub->add_option("--delta", o.delta, "upper barrier");
      sub->add_option("--d0", o.d0, "initial distance");
      sub->add_option("--count", o.count, "samples");
      sub->add_option("--max-iter", o.max_iter, "censoring budget per sample");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  for (const auto& [name, help] : subs)
    if (app.got_subcommand(name)) return run(name, o);
  return kConfig;
}
