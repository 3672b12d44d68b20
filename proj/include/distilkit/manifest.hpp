#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "distilkit/error.hpp"
#include "distilkit/hash.hpp"

namespace distilkit {

inline std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot checksum missing file: " + path);
  std::string contents{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  return murmur3_128(contents).hex();
}

// Reproducibility record written alongside each command's outputs. Reruns
// with an equal manifest produce bit-identical model outputs (timings aside).
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 42;
  int threads = 1;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    nlohmann::json out_entries = nlohmann::json::array();
    for (const auto& path : outputs)
      out_entries.push_back({{"path", path}, {"checksum", file_checksum(path)}});
    return {{"command", command}, {"config", config},   {"seed", seed},
            {"threads", threads}, {"inputs", inputs},   {"outputs", out_entries},
            {"timestamp", iso8601_utc_now()}};
  }

  // Written next to the primary output as <output>.manifest.json.
  std::string write(const std::string& primary_output) const {
    std::string path = primary_output + ".manifest.json";
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest: " + path);
    os << to_json().dump(2) << '\n';
    return path;
  }
};

}  // namespace distilkit
