#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ssda {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility record for one CLI run: resolved config snapshot, seeds,
// input digests (captured before any compute), outputs, timestamps.
struct RunManifest {
  std::string command;
  std::string version = kToolVersion;
  uint64_t seed = 0;
  std::string config_text;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;
  std::string status = "running";
};

// FNV-1a 64-bit content digest, hex-encoded.
std::string fnv1a_file_digest(const std::string& path);

void write_manifest(const RunManifest& m, const std::string& path);

std::string timestamp_utc();

}  // namespace ssda
