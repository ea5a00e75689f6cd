#include "ssda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssda {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  check(!preds.empty() && preds.size() == labels.size(), "accuracy: size mismatch");
  long correct = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels, int class_count) {
  check(!preds.empty() && preds.size() == labels.size(), "macro_f1: size mismatch");
  check(class_count >= 2, "macro_f1: need at least 2 classes");
  double sum = 0.0;
  for (int k = 0; k < class_count; ++k) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      check(labels[i] >= 0 && labels[i] < class_count, "macro_f1: label out of range");
      if (preds[i] == k && labels[i] == k) ++tp;
      if (preds[i] == k && labels[i] != k) ++fp;
      if (preds[i] != k && labels[i] == k) ++fn;
    }
    long denom = 2 * tp + fp + fn;
    sum += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(class_count);
}

Tensor<double> confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                         int class_count, bool normalize) {
  check(preds.size() == labels.size(), "confusion: size mismatch");
  Tensor<double> m({class_count, class_count});
  for (size_t i = 0; i < preds.size(); ++i) {
    check(labels[i] >= 0 && labels[i] < class_count, "confusion: label out of range");
    check(preds[i] >= 0 && preds[i] < class_count, "confusion: prediction out of range");
    m.at(labels[i], preds[i]) += 1.0;
  }
  if (normalize) {
    for (int r = 0; r < class_count; ++r) {
      double row = 0.0;
      for (int c = 0; c < class_count; ++c) row += m.at(r, c);
      if (row > 0.0)
        for (int c = 0; c < class_count; ++c) m.at(r, c) /= row;
    }
  }
  return m;
}

double wilcoxon_exact(std::vector<double> differences) {
  differences.erase(std::remove(differences.begin(), differences.end(), 0.0),
                    differences.end());
  if (differences.empty()) return 1.0;
  long n = static_cast<long>(differences.size());
  check(n <= 25, "wilcoxon_exact: exact enumeration is limited to 25 non-zero differences");

  // Average ranks of |d|, ties shared.
  std::vector<long> order(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    return std::abs(differences[static_cast<size_t>(a)]) <
           std::abs(differences[static_cast<size_t>(b)]);
  });
  std::vector<double> ranks(static_cast<size_t>(n), 0.0);
  long i = 0;
  while (i < n) {
    long j = i;
    while (j + 1 < n && std::abs(differences[static_cast<size_t>(order[static_cast<size_t>(j + 1)])]) ==
                            std::abs(differences[static_cast<size_t>(order[static_cast<size_t>(i)])]))
      ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (long k = i; k <= j; ++k) ranks[static_cast<size_t>(order[static_cast<size_t>(k)])] = avg;
    i = j + 1;
  }

  double w_obs = 0.0;
  for (long k = 0; k < n; ++k)
    if (differences[static_cast<size_t>(k)] > 0.0) w_obs += ranks[static_cast<size_t>(k)];

  // Full sign-assignment distribution of W+.
  uint64_t total = 1ULL << n;
  uint64_t count_ge = 0, count_le = 0;
  const double tol = 1e-9;
  for (uint64_t bits = 0; bits < total; ++bits) {
    double w = 0.0;
    for (long k = 0; k < n; ++k)
      if (bits & (1ULL << k)) w += ranks[static_cast<size_t>(k)];
    if (w >= w_obs - tol) ++count_ge;
    if (w <= w_obs + tol) ++count_le;
  }
  double p = 2.0 * static_cast<double>(std::min(count_ge, count_le)) / static_cast<double>(total);
  return std::min(p, 1.0);
}

}  // namespace ssda
