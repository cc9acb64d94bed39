#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sevo/version.hpp"

namespace sevo {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct OutputDigest {
  std::string file;    // name relative to the output directory
  std::string digest;  // fnv1a64 of the file bytes, lowercase hex
};

/// Reproducibility record written after all experiment outputs: which
/// configuration ran, under which toolkit version and seed, and the digest of
/// every file it produced.
struct RunManifest {
  std::string dialect = kConfigDialect;
  std::string version = kVersion;
  std::string experiment;
  std::string wall_clock_utc;
  std::uint64_t seed = 0;
  int threads = 1;
  bool checks_passed = true;
  std::string config_echo;
  std::vector<OutputDigest> outputs;

  std::string to_json() const {
    nlohmann::json j;
    j["dialect"] = dialect;
    j["version"] = version;
    j["experiment"] = experiment;
    j["wall_clock_utc"] = wall_clock_utc;
    j["seed"] = seed;
    j["threads"] = threads;
    j["checks_passed"] = checks_passed;
    j["config_echo"] = config_echo;
    j["outputs"] = nlohmann::json::array();
    for (const auto& o : outputs) j["outputs"].push_back({{"file", o.file}, {"digest", o.digest}});
    return j.dump(2) + "\n";
  }
};

inline std::string utc_timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace sevo
