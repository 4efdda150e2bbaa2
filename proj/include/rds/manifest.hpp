#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "rds/error.hpp"

#ifndef RDS_VERSION
#define RDS_VERSION "0.0.0"
#endif

namespace rds {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) == 1, ErrorCode::precondition,
          "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::precondition, "cannot read '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(f), {});
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

struct ManifestFile {
  std::string name;    // relative to the run directory
  std::string schema;  // csv schema name, or "json"
  int schema_version = 0;
  std::uint64_t rows = 0;
  std::string sha256;
};

/// Provenance record written next to every run's outputs.
struct RunManifest {
  std::string subcommand;
  std::string code_version = RDS_VERSION;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t workers = 1;
  std::string hypothesis_hash;  // sha256 of the preflight report JSON
  bool preflight_pass = false;
  bool forced = false;
  std::vector<ManifestFile> files;
  std::vector<std::string> flags;  // non-fatal conditions, e.g. ORBIT_MERGED
  double wall_clock_seconds = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["code_version"] = code_version;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["workers"] = workers;
    j["hypothesis_report_hash"] = hypothesis_hash;
    j["preflight_pass"] = preflight_pass;
    j["forced"] = forced;
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& f : files)
      j["files"].push_back({{"name", f.name},
                            {"schema", f.schema},
                            {"schema_version", f.schema_version},
                            {"rows", f.rows},
                            {"sha256", f.sha256}});
    j["flags"] = flags;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
  }
};

}  // namespace rds
