#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "rds/config.hpp"
#include "rds/csv.hpp"
#include "rds/experiment.hpp"
#include "rds/manifest.hpp"

using namespace rds;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("rds_test_config_io_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d / name;
}

std::string write_ini(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name);
  std::ofstream(p) << text;
  return p.string();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rds::Error thrown";
  return ErrorCode::precondition;
}

}  // namespace

TEST(Config, LoadsSectionsAndDefaults) {
  const ConfigValues c = load_config(write_ini("ok.ini",
                                               "; comment\n"
                                               "[run]\nseed = 7\nworkers = 2\n"
                                               "[noise]\ntheta = 0.17\n"
                                               "[lyapunov]\nn = 1e7\n"
                                               "[moment]\nq_grid = -1, -0.5, 0, 0.5, 1\n"));
  EXPECT_EQ(c.count("run.seed"), 7u);
  EXPECT_EQ(c.count("run.workers"), 2u);
  EXPECT_DOUBLE_EQ(c.real("noise.theta"), 0.17);
  EXPECT_EQ(c.count("lyapunov.n"), 10000000u);
  EXPECT_EQ(c.list("moment.q_grid"), (std::vector<double>{-1, -0.5, 0, 0.5, 1}));
  // untouched keys fall back to the schema defaults
  EXPECT_EQ(c.text("map.family"), "example_nu");
  EXPECT_DOUBLE_EQ(c.real("map.nu"), 0.6);
  EXPECT_EQ(c.count("grid.n"), 1024u);
  EXPECT_FALSE(c.has("noise.tune_zero"));
  EXPECT_EQ(code_of([&] { c.real("noise.tune_zero"); }), ErrorCode::config);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(code_of([] { load_config(write_ini("k.ini", "[run]\nsed = 1\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("s.ini", "[bogus]\nx = 1\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("t.ini", "seed = 1\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("n.ini", "[noise]\ntheta = abc\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("c.ini", "[run]\nseed = 1.5\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("m.ini", "[run]\nseed = -3\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("l.ini", "[moment]\nq_grid = 1,,2\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(write_ini("p.ini", "[run\nseed = 1\n")); }), ErrorCode::config);
  EXPECT_EQ(code_of([] { load_config(scratch("missing.ini").string()); }), ErrorCode::config);
}

TEST(Config, CanonicalFormIsSortedAndComplete) {
  ConfigValues a, b;
  a.set("noise.theta", "0.2");
  a.set("run.seed", "3");
  b.set("run.seed", "3");
  b.set("noise.theta", "0.2");
  EXPECT_EQ(a.canonical(), b.canonical());
  std::string prev;
  std::size_t lines = 0;
  std::istringstream in(a.canonical());
  for (std::string line; std::getline(in, line); ++lines) {
    EXPECT_LT(prev, line);
    prev = line;
  }
  std::size_t with_default = 0;
  for (const auto& e : config_schema()) with_default += *e.fallback ? 1 : 0;
  EXPECT_GE(lines, with_default);
  b.set("run.seed", "4");
  EXPECT_NE(sha256_hex(a.canonical()), sha256_hex(b.canonical()));
}

TEST(Config, MapFamilies) {
  ConfigValues c;
  EXPECT_DOUBLE_EQ(map_from_config(c).deriv(0.0), 0.6);
  c.set("map.family", "affine_doubling");
  EXPECT_DOUBLE_EQ(map_from_config(c).deriv(0.37), 2.0);
  c.set("map.family", "custom_poly_deriv");
  c.set("map.base", "1");
  c.set("map.coeffs", "0, 2");
  EXPECT_NEAR(map_from_config(c).deriv(0.5), 2.0, 1e-14);
  c.set("map.family", "logistic");
  EXPECT_EQ(code_of([&] { map_from_config(c); }), ErrorCode::config);
}

TEST(Csv, ShortestRoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.12056474298, 5e-324}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, WriterEnforcesTheSchema) {
  CsvWriter w("moment");
  w << 0.5 << 0.25 << 1e-12;
  w.end_row();
  EXPECT_EQ(w.text(), "q,Lambda,residual\n0.5,0.25,1e-12\n");
  EXPECT_EQ(w.rows(), 1u);
  w << 1.0;
  EXPECT_THROW(w.end_row(), Error);
  CsvWriter x("distance_series");
  x << 1 << 0.5;
  EXPECT_THROW(x << 0.1, Error);
  EXPECT_THROW(CsvWriter("nope"), Error);
}

TEST(Csv, PublishedHeaders) {
  using V = std::vector<std::string_view>;
  EXPECT_EQ(csv_schema("lyapunov").columns, (V{"family", "nu", "theta", "n", "seed", "lambda_hat", "stderr"}));
  EXPECT_EQ(csv_schema("distance_series").columns, (V{"k", "d_k"}));
  EXPECT_EQ(csv_schema("moment").columns, (V{"q", "Lambda", "residual"}));
  EXPECT_EQ(csv_schema("density").columns, (V{"x", "rho"}));
  EXPECT_EQ(csv_schema("passage").columns,
            (V{"epsilon", "delta", "d0", "seed", "tau_minus", "tau_plus", "first", "censored"}));
  EXPECT_EQ(csv_schema("histogram").columns, (V{"edge_lo", "edge_hi", "count"}));
  EXPECT_EQ(csv_schema("excursion").columns, (V{"excursion_id", "eps", "count"}));
  for (const auto& s : csv_schemas()) EXPECT_GE(s.version, 1) << s.name;
}

TEST(Manifest, Sha256KnownAnswers) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Manifest, RunOutputsRecordEveryFile) {
  const fs::path dir = scratch("run");
  RunOutputs out(dir);
  CsvWriter w("distance_series");
  for (int k = 0; k < 3; ++k) {
    w << k << std::ldexp(1e-3, k);
    w.end_row();
  }
  out.csv("distance_series.csv", w);
  out.json("summary.json", {{"a", 1}});
  out.flag("ORBIT_MERGED");
  ASSERT_EQ(out.files().size(), 2u);
  const ManifestFile& f = out.files()[0];
  EXPECT_EQ(f.schema, "distance_series");
  EXPECT_EQ(f.schema_version, 1);
  EXPECT_EQ(f.rows, 3u);
  EXPECT_EQ(f.sha256, file_sha256((dir / "distance_series.csv").string()));
  EXPECT_EQ(out.files()[1].sha256, file_sha256((dir / "summary.json").string()));
  RunManifest m;
  m.files = out.files();
  m.flags = out.flags();
  const auto j = m.to_json();
  for (const char* k : {"subcommand", "code_version", "config_hash", "seed", "workers", "hypothesis_report_hash",
                        "preflight_pass", "forced", "files", "flags", "wall_clock_seconds"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["flags"][0], "ORBIT_MERGED");
  fs::remove_all(dir.parent_path());
}
