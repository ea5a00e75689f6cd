#pragma once

#include <stdexcept>

#include "ssda/types.hpp"

namespace ssda {

// n = floor((T - m) / p) + 1 for window length m and step p.
inline long window_count(long T, long m, long p) {
  if (m > T) return 0;
  return (T - m) / p + 1;
}

// Slices a trial into its overlapping temporal windows. Window i covers
// sample columns [i*p, i*p + m); trailing samples that do not fill a whole
// window are discarded.
inline WindowSequence slice_trial(const Trial& trial, long m, long p) {
  if (m < 1 || m > trial.samples)
    throw std::runtime_error("slice_trial: window length must be in [1, T]");
  if (p < 1) throw std::runtime_error("slice_trial: step must be >= 1");
  WindowSequence ws;
  ws.source_trial_id = trial.trial_id;
  ws.channels = trial.channels;
  ws.window_len = m;
  ws.step = p;
  long n = window_count(trial.samples, m, p);
  ws.windows.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    Tensor<double> w({trial.channels, m});
    long off = i * p;
    for (long c = 0; c < trial.channels; ++c)
      for (long t = 0; t < m; ++t) w.at(c, t) = trial.at(c, off + t);
    ws.windows.push_back(std::move(w));
  }
  return ws;
}

}  // namespace ssda
