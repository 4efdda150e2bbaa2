#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rds/circle_map.hpp"
#include "rds/error.hpp"
#include "rds/noise.hpp"

namespace rds {

enum class ValueType { real, count, text, real_list };

struct SchemaEntry {
  const char* key;  // section.name
  ValueType type;
  const char* fallback;  // "" means no default (key optional)
  const char* doc;
};

/// Every key accepted in an experiment config file.
inline const std::vector<SchemaEntry>& config_schema() {
  static const std::vector<SchemaEntry> s = {
      {"run.seed", ValueType::count, "1", "root seed for all randomness"},
      {"run.workers", ValueType::count, "1", "worker threads (results do not depend on it)"},
      {"run.out", ValueType::text, "out", "output directory"},
      {"map.family", ValueType::text, "example_nu", "example_nu | affine_doubling | custom_poly_deriv"},
      {"map.nu", ValueType::real, "0.6", "example_nu parameter in (0, 2)"},
      {"map.base", ValueType::real, "", "custom_poly_deriv constant term"},
      {"map.coeffs", ValueType::real_list, "", "custom_poly_deriv p(x) coefficients, ascending"},
      {"noise.theta", ValueType::real, "0.2", "noise amplitude in (0, 0.5]"},
      {"noise.tune_zero", ValueType::real_list, "", "lo,hi: replace theta by the zero of the spectral exponent"},
      {"quadrature.n", ValueType::count, "96", "noise quadrature nodes"},
      {"quadrature.kind", ValueType::text, "gauss_legendre", "gauss_legendre | uniform_panel"},
      {"grid.n", ValueType::count, "1024", "spectral grid size (power of two >= 256)"},
      {"power_iter.tol", ValueType::real, "1e-13", "relative Rayleigh quotient change"},
      {"power_iter.max_iter", ValueType::count, "5000", "power iteration budget"},
      {"moment.q_grid", ValueType::real_list, "-1,-0.5,-0.1,-0.05,0,0.05,0.1,0.5,1", "q values of the moment curve"},
      {"moment.mc_q", ValueType::real_list, "-1,-0.5,0.5,1", "q values cross-checked by Monte Carlo"},
      {"moment.mc_n", ValueType::count, "24", "Monte Carlo horizon"},
      {"moment.mc_ensemble", ValueType::count, "1000000", "Monte Carlo ensemble size"},
      {"moment.variance_n", ValueType::count, "1000", "orbit length for the Monte Carlo V estimate"},
      {"moment.variance_ensemble", ValueType::count, "10000", "orbits for the Monte Carlo V estimate"},
      {"lyapunov.n", ValueType::count, "10000000", "iterates per Birkhoff estimate"},
      {"lyapunov.burn_in", ValueType::count, "", "burn-in iterates (default n/10)"},
      {"sweep.theta", ValueType::real_list, "", "theta values of a sweep"},
      {"sweep.nu", ValueType::real_list, "", "nu values of a sweep"},
      {"two_point.n", ValueType::count, "100000", "series length"},
      {"two_point.x0", ValueType::real, "", "initial x (default drawn from the stream)"},
      {"two_point.y0", ValueType::real, "", "initial y (default drawn from the stream)"},
      {"two_point.seeds", ValueType::count, "1", "number of independent series"},
      {"two_point.stride", ValueType::count, "1", "write every stride-th d_k"},
      {"two_point.window", ValueType::real, "0.1", "final window fraction for tail statistics"},
      {"two_point.ensemble", ValueType::count, "0", "trichotomy ensemble size (0 skips, else >= 32)"},
      {"density.tol", ValueType::real, "1e-12", "L1 tolerance of the transfer-operator iteration"},
      {"density.orbit_n", ValueType::count, "10000000", "orbit length of the histogram cross-check"},
      {"density.bins", ValueType::count, "256", "histogram bins of the cross-check"},
      {"passage.mode", ValueType::text, "ensemble", "ensemble | report"},
      {"passage.epsilon", ValueType::real, "1e-8", "lower barrier"},
      {"passage.delta", ValueType::real, "1e-2", "upper barrier"},
      {"passage.d0", ValueType::real, "1e-5", "initial distance"},
      {"passage.count", ValueType::count, "10000", "samples per ensemble"},
      {"passage.max_iter", ValueType::count, "10000000", "censoring budget per sample"},
      {"passage.kappa", ValueType::real, "0.1", "tail design requires d0 < kappa delta"},
      {"passage.zero_deltas", ValueType::real_list, "1e-2,5e-3,2.5e-3", "zero-exponent design: delta values"},
      {"passage.zero_log_bands", ValueType::real_list, "48,56,64", "zero-exponent design: ln(delta/eps)"},
      {"passage.zero_fractions", ValueType::real_list, "0.25,0.5,0.75", "zero-exponent design: ln(delta/d0)/ln(delta/eps)"},
      {"passage.escape_log_ratios", ValueType::real_list, "2,4,6", "escape design: ln(delta/d0)"},
      {"passage.tail_log_d0", ValueType::real, "16", "tail design: ln(delta/d0)"},
      {"passage.tail_log_eps", ValueType::real_list, "4,8,12,16", "tail design: ln(d0/eps)"},
      {"passage.tail_count", ValueType::count, "20000", "tail design: samples per epsilon"},
      {"measure.regime", ValueType::text, "auto", "auto | zero | positive"},
      {"measure.delta", ValueType::real, "1e-2", "excursion outer radius"},
      {"measure.kappa", ValueType::real, "0.1", "excursion entry scale as a fraction of delta"},
      {"measure.eps", ValueType::real_list, "", "excursion eps grid (default 1e-4 down to 1e-10 in half decades)"},
      {"measure.excursions", ValueType::count, "1000", "excursions"},
      {"measure.max_iter", ValueType::count, "10000000", "censoring budget per excursion"},
      {"measure.hist_n", ValueType::count, "10000000", "histogram orbit length"},
      {"measure.eps_min", ValueType::real, "1e-9", "smallest histogram edge"},
      {"measure.bins", ValueType::count, "170", "histogram bins"},
      {"measure.fit_lo", ValueType::real, "1e-5", "fit window lower end"},
      {"measure.fit_hi", ValueType::real, "1e-2", "fit window upper end"},
      {"preflight.h2_grid", ValueType::count, "512", "H2 reachability cells"},
      {"preflight.h2_k_max", ValueType::count, "64", "H2 horizon budget"},
      {"preflight.h4_grid", ValueType::count, "256", "H4 scan resolution per axis"},
      {"preflight.h4_delta_tol", ValueType::real, "1e-3", "H4 near-tangency threshold"},
      {"preflight.h4_c_min", ValueType::real, "1e-2", "H4 minimal curvature"},
      {"preflight.h5_grid", ValueType::count, "128", "H5 pair grid"},
      {"preflight.h5_a_grid", ValueType::count, "16", "H5 parameter grid per axis"},
      {"preflight.h5_tol", ValueType::real, "1e-6", "H5 threshold on |H|"},
  };
  return s;
}

inline const SchemaEntry* find_schema(const std::string& key) {
  for (const auto& e : config_schema())
    if (key == e.key) return &e;
  return nullptr;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  const auto r = std::from_chars(b, e, out);
  if (r.ec != std::errc() || r.ptr != e) throw Error(ErrorCode::config, "key '" + key + "': not a number: '" + v + "'");
  return out;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  // accept integer-valued reals such as 1e7
  const double d = parse_real(key, v);
  if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
    throw Error(ErrorCode::config, "key '" + key + "': not a nonnegative integer: '" + v + "'");
  return static_cast<std::uint64_t>(d);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
  if (out.empty()) throw Error(ErrorCode::config, "key '" + key + "': empty list");
  return out;
}

/// Raw key/value pairs after schema validation. Lookups fall back to the schema default.
class ConfigValues {
 public:
  void set(const std::string& key, const std::string& value) {
    const SchemaEntry* e = find_schema(key);
    if (!e) throw Error(ErrorCode::config, "unknown config key '" + key + "'");
    switch (e->type) {
      case ValueType::real: parse_real(key, value); break;
      case ValueType::count: parse_count(key, value); break;
      case ValueType::real_list: parse_list(key, value); break;
      case ValueType::text: break;
    }
    values_[key] = value;
  }

  std::optional<std::string> raw(const std::string& key) const {
    const SchemaEntry* e = find_schema(key);
    require(e != nullptr, ErrorCode::config, "unknown config key '" + key + "'");
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    if (*e->fallback) return std::string(e->fallback);
    return std::nullopt;
  }

  bool has(const std::string& key) const { return raw(key).has_value(); }
  double real(const std::string& key) const { return parse_real(key, need(key)); }
  std::uint64_t count(const std::string& key) const { return parse_count(key, need(key)); }
  std::string text(const std::string& key) const { return need(key); }
  std::vector<double> list(const std::string& key) const { return parse_list(key, need(key)); }

  /// Effective configuration (explicit values and defaults), one key=value per line, sorted.
  std::string canonical() const {
    std::map<std::string, std::string> all;
    for (const auto& e : config_schema())
      if (auto v = raw(e.key)) all[e.key] = *v;
    std::string out;
    for (const auto& [k, v] : all) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::string need(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw Error(ErrorCode::config, "missing required config key '" + key + "'");
    return *v;
  }
  std::map<std::string, std::string> values_;
};

/// Reads an INI file ([section] headers, key = value lines, ';' or '#' comments).
inline ConfigValues load_config(const std::string& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::config, std::string("cannot read config: ") + e.what());
  }
  ConfigValues cv;
  for (const auto& [section, body] : pt) {
    if (body.empty()) throw Error(ErrorCode::config, "top-level key '" + section + "' outside a section");
    for (const auto& [name, leaf] : body) cv.set(section + "." + name, leaf.get_value<std::string>());
  }
  return cv;
}

inline CircleMap map_from_config(const ConfigValues& c) {
  const std::string fam = c.text("map.family");
  if (fam == "example_nu") return CircleMap::example_nu(c.real("map.nu"));
  if (fam == "affine_doubling") return CircleMap::affine_doubling();
  if (fam == "custom_poly_deriv") return CircleMap::custom_poly_deriv(c.real("map.base"), c.list("map.coeffs"));
  throw Error(ErrorCode::config, "unknown map family '" + fam + "'");
}

inline NoiseQuadrature quadrature_from_config(const ConfigValues& c, double theta) {
  return NoiseQuadrature(theta, c.count("quadrature.n"), parse_quadrature_kind(c.text("quadrature.kind")));
}

}  // namespace rds
