#include "ssda/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssda {

std::string fnv1a_file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("digest: cannot open '" + path + "'");
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    std::streamsize n = f.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<uint8_t>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + out;
}

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("manifest: cannot open '" + path + "'");
  f << "command = " << m.command << "\n";
  f << "version = " << m.version << "\n";
  f << "seed = " << m.seed << "\n";
  f << "started_at = " << m.started_at << "\n";
  f << "finished_at = " << m.finished_at << "\n";
  f << "status = " << m.status << "\n";
  for (const auto& [p, d] : m.inputs) f << "input = " << p << " " << d << "\n";
  for (const auto& o : m.outputs) f << "output = " << o << "\n";
  f << "--- resolved config ---\n";
  f << m.config_text;
}

}  // namespace ssda
