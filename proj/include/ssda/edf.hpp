#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssda/types.hpp"

namespace ssda {

// Reads an EDF/EDF+ continuous recording: 256-byte fixed header, 256 bytes
// of subheader per signal, then 16-bit little-endian data records mapped to
// physical units per signal. An "EDF Annotations" signal is decoded into
// (onset, label) events and excluded from Recording.signals. All data
// signals must share one sampling rate.
Recording read_edf(const std::string& path);
Recording parse_edf(const std::vector<uint8_t>& bytes);

}  // namespace ssda
