#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "rds/error.hpp"

namespace rds {

/// Published CSV layouts. The version is bumped whenever a header changes.
struct CsvSchema {
  std::string_view name;
  int version;
  std::vector<std::string_view> columns;
};

inline const std::vector<CsvSchema>& csv_schemas() {
  static const std::vector<CsvSchema> s = {
      {"lyapunov", 1, {"family", "nu", "theta", "n", "seed", "lambda_hat", "stderr"}},
      {"distance_series", 1, {"k", "d_k"}},
      {"moment", 1, {"q", "Lambda", "residual"}},
      {"moment_mc", 1, {"q", "Lambda", "mc_estimate", "mc_stderr", "n", "ensemble"}},
      {"gamma", 1, {"family", "nu", "theta", "lambda0", "V", "gamma", "Lambda_at_gamma"}},
      {"density", 1, {"x", "rho"}},
      {"density_hist", 1, {"edge_lo", "edge_hi", "density"}},
      {"passage", 1, {"epsilon", "delta", "d0", "seed", "tau_minus", "tau_plus", "first", "censored"}},
      {"passage_cells", 1, {"design", "epsilon", "delta", "d0", "count", "minus", "plus", "censored", "p_minus_hat",
                            "p_minus_lo", "p_minus_hi", "mean_min_stop", "mean_min_stop_se"}},
      {"escape", 1, {"delta", "d0", "mean_tau_plus", "stderr"}},
      {"histogram", 1, {"edge_lo", "edge_hi", "count"}},
      {"excursion", 1, {"excursion_id", "eps", "count"}},
  };
  return s;
}

inline const CsvSchema& csv_schema(std::string_view name) {
  for (const auto& s : csv_schemas())
    if (s.name == name) return s;
  throw Error(ErrorCode::precondition, "unknown csv schema '" + std::string(name) + "'");
}

/// Locale-independent shortest round-trip formatting.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Rows are buffered in memory and written in one go by save().
class CsvWriter {
 public:
  explicit CsvWriter(std::string_view schema) : schema_(&csv_schema(schema)) {
    for (std::size_t i = 0; i < schema_->columns.size(); ++i) {
      if (i) text_ += ',';
      text_ += schema_->columns[i];
    }
    text_ += '\n';
  }

  CsvWriter& operator<<(double v) { return field(format_double(v)); }
  CsvWriter& operator<<(std::uint64_t v) { return field(std::to_string(v)); }
  CsvWriter& operator<<(std::int64_t v) { return field(std::to_string(v)); }
  CsvWriter& operator<<(int v) { return field(std::to_string(v)); }
  CsvWriter& operator<<(std::string_view v) { return field(std::string(v)); }
  CsvWriter& operator<<(const char* v) { return field(v); }

  /// Closes the current row; the field count must match the schema.
  void end_row() {
    require(col_ == schema_->columns.size(), ErrorCode::precondition,
            "csv row for '" + std::string(schema_->name) + "' has the wrong number of fields");
    text_ += '\n';
    col_ = 0;
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  const CsvSchema& schema() const { return *schema_; }
  const std::string& text() const { return text_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::precondition, "cannot open '" + path + "' for writing");
    f << text_;
    require(f.good(), ErrorCode::precondition, "write to '" + path + "' failed");
  }

 private:
  CsvWriter& field(const std::string& s) {
    require(col_ < schema_->columns.size(), ErrorCode::precondition, "too many csv fields");
    if (col_) text_ += ',';
    text_ += s;
    ++col_;
    return *this;
  }

  const CsvSchema* schema_;
  std::string text_;
  std::size_t col_ = 0;
  std::size_t rows_ = 0;
};

}  // namespace rds
