#include "ssda/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ssda {

namespace {

// Little-endian scalar IO. The host is little-endian on every platform we
// build for; memcpy keeps it alias-safe.
template <typename T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw std::runtime_error(std::string("file truncated while reading ") + what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_str(std::ostream& os, const std::string& s) {
  if (s.size() > 0xFFFF) throw std::runtime_error("string too long for format");
  put<uint16_t>(os, static_cast<uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is, const char* what) {
  uint16_t n = get<uint16_t>(is, what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error(std::string("file truncated while reading ") + what);
  return s;
}

constexpr char kArrayMagic[4] = {'E', 'E', 'G', 'A'};
constexpr char kDatasetMagic[4] = {'E', 'E', 'G', 'D'};
constexpr uint8_t kVersion = 1;

}  // namespace

void write_array_file(const Recording& rec, const std::string& path) {
  if (rec.channels < 1) throw std::runtime_error("array: bad channel count");
  if (static_cast<long>(rec.channel_labels.size()) != rec.channels)
    throw std::runtime_error("array: label count must equal channel count");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("array: cannot open '" + path + "' for writing");
  f.write(kArrayMagic, 4);
  put<uint8_t>(f, kVersion);
  put<uint32_t>(f, static_cast<uint32_t>(rec.channels));
  put<uint64_t>(f, static_cast<uint64_t>(rec.length));
  put<double>(f, rec.fs);
  for (const auto& lbl : rec.channel_labels) put_str(f, lbl);
  for (double v : rec.signals) put<float>(f, static_cast<float>(v));
  put<uint32_t>(f, static_cast<uint32_t>(rec.annotations.size()));
  for (const auto& a : rec.annotations) {
    put<double>(f, a.onset_s);
    put_str(f, a.label);
  }
  if (!f) throw std::runtime_error("array: write failed for '" + path + "'");
}

Recording read_array_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("array: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kArrayMagic, 4) != 0)
    throw std::runtime_error("array: bad magic in '" + path + "'");
  uint8_t version = get<uint8_t>(f, "version");
  if (version != kVersion)
    throw std::runtime_error("array: unsupported version " + std::to_string(version));
  Recording rec;
  uint32_t c = get<uint32_t>(f, "channel count");
  if (c == 0) throw std::runtime_error("array: bad channel count");
  rec.channels = static_cast<long>(c);
  rec.length = static_cast<long>(get<uint64_t>(f, "length"));
  rec.fs = get<double>(f, "sampling rate");
  for (long i = 0; i < rec.channels; ++i) rec.channel_labels.push_back(get_str(f, "label"));
  rec.signals.resize(static_cast<size_t>(rec.channels * rec.length));
  for (auto& v : rec.signals) v = static_cast<double>(get<float>(f, "samples"));
  uint32_t na = get<uint32_t>(f, "annotation count");
  for (uint32_t i = 0; i < na; ++i) {
    Annotation a;
    a.onset_s = get<double>(f, "annotation onset");
    a.label = get_str(f, "annotation label");
    rec.annotations.push_back(std::move(a));
  }
  return rec;
}

void save_dataset(const std::vector<Trial>& trials, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  f.write(kDatasetMagic, 4);
  put<uint8_t>(f, kVersion);
  put<uint32_t>(f, static_cast<uint32_t>(trials.size()));
  for (const auto& t : trials) {
    put_str(f, t.subject_id);
    put_str(f, t.trial_id);
    put<int32_t>(f, t.label);
    put<uint32_t>(f, static_cast<uint32_t>(t.class_count));
    put<uint32_t>(f, static_cast<uint32_t>(t.channels));
    put<uint32_t>(f, static_cast<uint32_t>(t.samples));
    for (double v : t.data) put<float>(f, static_cast<float>(v));
  }
  if (!f) throw std::runtime_error("dataset: write failed for '" + path + "'");
}

std::vector<Trial> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kDatasetMagic, 4) != 0)
    throw std::runtime_error("dataset: bad magic in '" + path + "'");
  uint8_t version = get<uint8_t>(f, "version");
  if (version != kVersion)
    throw std::runtime_error("dataset: unsupported version " + std::to_string(version));
  uint32_t n = get<uint32_t>(f, "trial count");
  std::vector<Trial> trials;
  trials.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    Trial t;
    t.subject_id = get_str(f, "subject id");
    t.trial_id = get_str(f, "trial id");
    t.label = get<int32_t>(f, "label");
    t.class_count = static_cast<int>(get<uint32_t>(f, "class count"));
    t.channels = static_cast<long>(get<uint32_t>(f, "channels"));
    t.samples = static_cast<long>(get<uint32_t>(f, "samples"));
    t.data.resize(static_cast<size_t>(t.channels * t.samples));
    for (auto& v : t.data) v = static_cast<double>(get<float>(f, "trial data"));
    trials.push_back(std::move(t));
  }
  return trials;
}

EpochResult epoch(const Recording& rec, const std::map<std::string, int>& event_map,
                  double duration_s, const std::string& subject_id,
                  const std::string& session_id, double onset_offset_ms) {
  if (rec.fs <= 0) throw std::runtime_error("epoch: recording has no sampling rate");
  long T = static_cast<long>(std::llround(duration_s * rec.fs));
  if (T < 1) throw std::runtime_error("epoch: duration too short for one sample");

  int class_count = 0;
  for (const auto& [label, cls] : event_map) {
    (void)label;
    if (cls < 0) throw std::runtime_error("epoch: negative class index in event map");
    class_count = std::max(class_count, cls + 1);
  }

  EpochResult out;
  long index = 0;
  for (const auto& ann : rec.annotations) {
    auto it = event_map.find(ann.label);
    if (it == event_map.end()) continue;
    long start = static_cast<long>(std::llround((ann.onset_s + onset_offset_ms / 1000.0) * rec.fs));
    if (start < 0 || start + T > rec.length) {
      ++out.dropped;
      continue;
    }
    Trial t;
    t.subject_id = subject_id;
    t.trial_id = subject_id + "/" + session_id + "/" + std::to_string(index++);
    t.channels = rec.channels;
    t.samples = T;
    t.label = it->second;
    t.class_count = class_count;
    t.data.resize(static_cast<size_t>(t.channels * T));
    for (long c = 0; c < rec.channels; ++c)
      for (long s = 0; s < T; ++s) t.at(c, s) = rec.at(c, start + s);
    out.trials.push_back(std::move(t));
  }
  return out;
}

}  // namespace ssda
