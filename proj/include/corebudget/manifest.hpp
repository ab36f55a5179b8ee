#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "corebudget/errors.hpp"

namespace corebudget {

inline constexpr const char* kToolkitVersion = "0.1.0";

// FNV-1a 64-bit over the file bytes; enough to pin inputs in the manifest.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input file for digest: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

struct RunManifest {
  std::string subcommand;
  nlohmann::json resolved_config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;  // path -> digest
  std::string timestamp;

  static std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::ostringstream out;
    out << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"toolkit_version", kToolkitVersion},
                          {"subcommand", subcommand},
                          {"config", resolved_config},
                          {"seed", seed},
                          {"input_digests", input_digests},
                          {"timestamp", timestamp}};
  }
};

}  // namespace corebudget
