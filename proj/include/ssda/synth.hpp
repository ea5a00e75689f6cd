#pragma once

#include <utility>
#include <vector>

#include "ssda/types.hpp"

namespace ssda {

// What the generator actually planted, for oracle-style checks.
struct SynthGroundTruth {
  std::vector<double> class_cycles;        // oscillation cycles per trial, per class
  std::vector<double> class_phases;        // radians, per class
  std::vector<std::vector<double>> class_patterns;  // K x C spatial patterns (unit norm)
  double snr = 0.0;
  uint64_t seed = 0;
};

// Synthetic motor-imagery-like dataset: each class is a distinct oscillatory
// spatial pattern, mixed per subject and buried in white noise at the
// requested SNR (power ratio). snr == 0 removes the signal entirely;
// snr >= SynthSpec::kSnrClean removes the noise. Deterministic given the
// seed; labels are balanced within one trial per subject.
std::pair<std::vector<Trial>, SynthGroundTruth> synth_generate(const SynthSpec& spec);

}  // namespace ssda
