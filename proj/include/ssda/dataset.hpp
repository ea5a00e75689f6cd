#pragma once

#include <map>
#include <string>
#include <vector>

#include "ssda/types.hpp"

namespace ssda {

// "EEGA" array format: magic, version byte, u32 channel count, u64 length,
// f64 sampling rate, channel labels, row-major float32 samples, annotation
// table. Little-endian throughout. The lossless interchange path for
// recordings converted from other formats.
void write_array_file(const Recording& rec, const std::string& path);
Recording read_array_file(const std::string& path);

// "EEGD" dataset container holding epoched trials (float32 samples).
void save_dataset(const std::vector<Trial>& trials, const std::string& path);
std::vector<Trial> load_dataset(const std::string& path);

struct EpochResult {
  std::vector<Trial> trials;
  long dropped = 0;  // annotations whose window ran past the recording
};

// Cuts one fixed-duration trial per annotation whose label appears in
// `event_map`. The trial starts at the annotation onset shifted by
// `onset_offset_ms` and spans round(duration_s * fs) samples.
EpochResult epoch(const Recording& rec, const std::map<std::string, int>& event_map,
                  double duration_s, const std::string& subject_id,
                  const std::string& session_id, double onset_offset_ms = 0.0);

}  // namespace ssda
