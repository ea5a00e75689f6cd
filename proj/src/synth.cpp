#include "ssda/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "ssda/rng.hpp"

namespace ssda {

namespace {

// Unit-norm spatial patterns, pairwise orthogonalized while K <= C so the
// classes stay geometrically distinct.
std::vector<std::vector<double>> make_patterns(long K, long C, Rng& rng) {
  std::vector<std::vector<double>> pats;
  for (long k = 0; k < K; ++k) {
    std::vector<double> v(static_cast<size_t>(C));
    for (auto& x : v) x = rng.normal();
    for (const auto& prev : pats) {
      double dot = 0;
      for (long c = 0; c < C; ++c) dot += v[(size_t)c] * prev[(size_t)c];
      for (long c = 0; c < C; ++c) v[(size_t)c] -= dot * prev[(size_t)c];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-9) {
      // Degenerate draw (K > C exhausts the space); fall back to a raw
      // normalized vector.
      for (auto& x : v) x = rng.normal();
      norm = 0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
    }
    for (auto& x : v) x /= norm;
    pats.push_back(std::move(v));
  }
  return pats;
}

}  // namespace

std::pair<std::vector<Trial>, SynthGroundTruth> synth_generate(const SynthSpec& spec) {
  if (spec.subject_count < 1 || spec.trials_per_subject < 1 || spec.channels < 1 ||
      spec.samples < 1)
    throw std::runtime_error("synth_generate: all counts must be >= 1");
  if (spec.class_count < 2) throw std::runtime_error("synth_generate: need at least 2 classes");
  if (spec.snr < 0) throw std::runtime_error("synth_generate: snr must be >= 0");
  if (spec.subject_mixing < 0)
    throw std::runtime_error("synth_generate: subject_mixing must be >= 0");

  long K = spec.class_count, C = spec.channels, T = spec.samples;
  Rng rng(spec.seed);

  SynthGroundTruth gt;
  gt.snr = spec.snr;
  gt.seed = spec.seed;
  gt.class_patterns = make_patterns(K, C, rng);
  for (long k = 0; k < K; ++k) {
    // One shared carrier frequency: classes are told apart by where the
    // oscillation lives spatially, not by trivially separable spectra.
    gt.class_cycles.push_back(5.0);
    gt.class_phases.push_back(rng.uniform(0.0, 2.0 * M_PI));
  }

  // Per-subject mixing: identity plus a random perturbation of the requested
  // strength.
  std::vector<std::vector<double>> mixing(static_cast<size_t>(spec.subject_count));
  double mix_scale = spec.subject_mixing / std::sqrt(static_cast<double>(C));
  for (auto& M : mixing) {
    M.assign(static_cast<size_t>(C * C), 0.0);
    for (long i = 0; i < C; ++i)
      for (long j = 0; j < C; ++j)
        M[static_cast<size_t>(i * C + j)] = (i == j ? 1.0 : 0.0) + mix_scale * rng.normal();
  }

  bool pure_noise = spec.snr == 0.0;
  bool clean = spec.snr >= SynthSpec::kSnrClean;

  std::vector<Trial> trials;
  for (long s = 0; s < spec.subject_count; ++s) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "s%03ld", s);
    std::string subject(buf);

    // Balanced labels (within one trial), order shuffled per subject.
    std::vector<int> order(static_cast<size_t>(spec.trials_per_subject));
    for (long r = 0; r < spec.trials_per_subject; ++r)
      order[static_cast<size_t>(r)] = static_cast<int>(r % K);
    rng.shuffle(order);

    for (long r = 0; r < spec.trials_per_subject; ++r) {
      int cls = order[static_cast<size_t>(r)];
      Trial t;
      t.subject_id = subject;
      t.trial_id = subject + "/synth/" + std::to_string(r);
      t.channels = C;
      t.samples = T;
      t.label = cls;
      t.class_count = static_cast<int>(K);
      t.data.assign(static_cast<size_t>(C * T), 0.0);

      double amp = rng.uniform(0.9, 1.1);
      double sig_power = 0.0;
      if (!pure_noise) {
        // Spatial direction: subject mixing applied to the class pattern.
        std::vector<double> dir(static_cast<size_t>(C), 0.0);
        const auto& M = mixing[static_cast<size_t>(s)];
        const auto& pat = gt.class_patterns[static_cast<size_t>(cls)];
        for (long i = 0; i < C; ++i)
          for (long j = 0; j < C; ++j)
            dir[(size_t)i] += M[static_cast<size_t>(i * C + j)] * pat[(size_t)j];
        double omega = 2.0 * M_PI * gt.class_cycles[static_cast<size_t>(cls)] /
                       static_cast<double>(T);
        double phase = gt.class_phases[static_cast<size_t>(cls)];
        for (long c = 0; c < C; ++c)
          for (long x = 0; x < T; ++x) {
            double v = amp * dir[(size_t)c] * std::sin(omega * static_cast<double>(x) + phase);
            t.at(c, x) = v;
            sig_power += v * v;
          }
        sig_power /= static_cast<double>(C * T);
      }

      if (!clean) {
        double sigma = pure_noise ? 1.0 : std::sqrt(sig_power / spec.snr);
        for (auto& v : t.data) v += sigma * rng.normal();
      }
      trials.push_back(std::move(t));
    }
  }
  return {std::move(trials), std::move(gt)};
}

}  // namespace ssda
