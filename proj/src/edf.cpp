#include "ssda/edf.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ssda {

namespace {

constexpr char kAnnotationsLabel[] = "EDF Annotations";

std::string field(const std::vector<uint8_t>& b, size_t off, size_t len) {
  if (off + len > b.size()) throw std::runtime_error("edf: truncated header");
  std::string s(reinterpret_cast<const char*>(b.data()) + off, len);
  size_t begin = s.find_first_not_of(' ');
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(' ');
  return s.substr(begin, end - begin + 1);
}

long num_field(const std::vector<uint8_t>& b, size_t off, size_t len, const char* what) {
  std::string s = field(b, off, len);
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw std::runtime_error(std::string("edf: non-numeric header field (") + what + "): '" + s +
                             "'");
  }
}

double dbl_field(const std::vector<uint8_t>& b, size_t off, size_t len, const char* what) {
  std::string s = field(b, off, len);
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw std::runtime_error(std::string("edf: non-numeric header field (") + what + "): '" + s +
                             "'");
  }
}

// Decodes the time-stamped annotation lists of one record. A TAL is
// "+onset[\x15duration]\x14text\x14...\x00"; empty texts (the per-record
// timekeeping TAL) produce no events.
void decode_tals(const uint8_t* bytes, size_t len, std::vector<Annotation>& out) {
  size_t i = 0;
  while (i < len) {
    size_t end = i;
    while (end < len && bytes[end] != 0x00) ++end;
    if (end > i) {
      std::string tal(reinterpret_cast<const char*>(bytes) + i, end - i);
      std::vector<std::string> parts;
      std::string cur;
      for (char c : tal) {
        if (c == '\x14') {
          parts.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      parts.push_back(cur);
      if (!parts.empty() && !parts[0].empty()) {
        std::string onset_str = parts[0];
        size_t dur = onset_str.find('\x15');
        if (dur != std::string::npos) onset_str = onset_str.substr(0, dur);
        try {
          double onset = std::stod(onset_str);
          for (size_t p = 1; p < parts.size(); ++p)
            if (!parts[p].empty()) out.push_back({onset, parts[p]});
        } catch (...) {
          // Garbled TAL onset: ignore the TAL rather than fail the record.
        }
      }
    }
    i = end + 1;
  }
}

}  // namespace

Recording parse_edf(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 256) throw std::runtime_error("edf: truncated header");

  std::string version = field(bytes, 0, 8);
  if (version != "0")
    throw std::runtime_error("edf: unsupported sample width or version (version field '" +
                             version + "', expected '0')");

  long header_bytes = num_field(bytes, 184, 8, "header bytes");
  long n_records = num_field(bytes, 236, 8, "record count");
  double record_dur = dbl_field(bytes, 244, 8, "record duration");
  long ns = num_field(bytes, 252, 4, "signal count");
  if (ns < 1) throw std::runtime_error("edf: signal count must be >= 1");

  size_t full_header = 256 + static_cast<size_t>(ns) * 256;
  if (bytes.size() < full_header) throw std::runtime_error("edf: truncated header");
  if (header_bytes != static_cast<long>(full_header))
    throw std::runtime_error("edf: header size field does not match signal count");

  struct SignalInfo {
    std::string label;
    double phys_min, phys_max;
    long dig_min, dig_max;
    long samples_per_record;
    bool is_annotation;
    double scale;
  };
  std::vector<SignalInfo> sig(static_cast<size_t>(ns));
  size_t o = 256;
  for (long s = 0; s < ns; ++s)
    sig[static_cast<size_t>(s)].label = field(bytes, o + static_cast<size_t>(s) * 16, 16);
  o += static_cast<size_t>(ns) * 16;  // label
  o += static_cast<size_t>(ns) * 80;  // transducer
  o += static_cast<size_t>(ns) * 8;   // physical dimension
  for (long s = 0; s < ns; ++s)
    sig[static_cast<size_t>(s)].phys_min =
        dbl_field(bytes, o + static_cast<size_t>(s) * 8, 8, "physical min");
  o += static_cast<size_t>(ns) * 8;
  for (long s = 0; s < ns; ++s)
    sig[static_cast<size_t>(s)].phys_max =
        dbl_field(bytes, o + static_cast<size_t>(s) * 8, 8, "physical max");
  o += static_cast<size_t>(ns) * 8;
  for (long s = 0; s < ns; ++s)
    sig[static_cast<size_t>(s)].dig_min =
        num_field(bytes, o + static_cast<size_t>(s) * 8, 8, "digital min");
  o += static_cast<size_t>(ns) * 8;
  for (long s = 0; s < ns; ++s)
    sig[static_cast<size_t>(s)].dig_max =
        num_field(bytes, o + static_cast<size_t>(s) * 8, 8, "digital max");
  o += static_cast<size_t>(ns) * 8;
  o += static_cast<size_t>(ns) * 80;  // prefiltering
  for (long s = 0; s < ns; ++s)
    sig[static_cast<size_t>(s)].samples_per_record =
        num_field(bytes, o + static_cast<size_t>(s) * 8, 8, "samples per record");
  o += static_cast<size_t>(ns) * 8;
  o += static_cast<size_t>(ns) * 32;  // reserved

  long record_size = 0;  // bytes
  for (auto& si : sig) {
    si.is_annotation = (si.label == kAnnotationsLabel);
    if (si.samples_per_record < 1)
      throw std::runtime_error("edf: samples per record must be >= 1");
    record_size += si.samples_per_record * 2;
    if (!si.is_annotation) {
      long drange = si.dig_max - si.dig_min;
      if (drange == 0) throw std::runtime_error("edf: empty digital range for '" + si.label + "'");
      si.scale = (si.phys_max - si.phys_min) / static_cast<double>(drange);
    } else {
      si.scale = 1.0;
    }
  }

  size_t payload = bytes.size() - full_header;
  if (n_records < 0) {
    // Unknown record count: infer from the payload, which must tile exactly.
    if (record_size == 0 || payload % static_cast<size_t>(record_size) != 0)
      throw std::runtime_error("edf: record-size mismatch");
    n_records = static_cast<long>(payload / static_cast<size_t>(record_size));
  }
  if (payload != static_cast<size_t>(n_records) * static_cast<size_t>(record_size))
    throw std::runtime_error("edf: record-size mismatch");

  // Uniform sampling across data signals.
  long data_spr = -1;
  long n_data = 0;
  for (const auto& si : sig) {
    if (si.is_annotation) continue;
    ++n_data;
    if (data_spr == -1)
      data_spr = si.samples_per_record;
    else if (si.samples_per_record != data_spr)
      throw std::runtime_error("edf: non-uniform sampling rates are not supported");
  }

  Recording rec;
  if (n_data > 0) {
    if (record_dur <= 0) throw std::runtime_error("edf: record duration must be positive");
    rec.fs = static_cast<double>(data_spr) / record_dur;
    rec.channels = n_data;
    rec.length = data_spr * n_records;
    rec.signals.assign(static_cast<size_t>(rec.channels * rec.length), 0.0);
    for (const auto& si : sig)
      if (!si.is_annotation) rec.channel_labels.push_back(si.label);
  }

  const uint8_t* p = bytes.data() + full_header;
  for (long r = 0; r < n_records; ++r) {
    long ch = 0;
    for (long s = 0; s < ns; ++s) {
      const SignalInfo& si = sig[static_cast<size_t>(s)];
      size_t nbytes = static_cast<size_t>(si.samples_per_record) * 2;
      if (si.is_annotation) {
        decode_tals(p, nbytes, rec.annotations);
      } else {
        double* dst = &rec.signals[static_cast<size_t>(ch * rec.length + r * data_spr)];
        for (long i = 0; i < si.samples_per_record; ++i) {
          int16_t raw = static_cast<int16_t>(static_cast<uint16_t>(p[2 * i]) |
                                             (static_cast<uint16_t>(p[2 * i + 1]) << 8));
          // Published linear map: P = Pmin + (D - Dmin) * (Pmax - Pmin)/(Dmax - Dmin).
          dst[i] = si.phys_min +
                   (static_cast<double>(raw) - static_cast<double>(si.dig_min)) * si.scale;
        }
        ++ch;
      }
      p += nbytes;
    }
  }
  return rec;
}

Recording read_edf(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("edf: cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_edf(bytes);
}

}  // namespace ssda
