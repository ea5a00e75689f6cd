#pragma once

#include <vector>

#include "ssda/tensor.hpp"

namespace ssda {

// Mean correctness.
double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Unweighted mean over classes of 2PR/(P+R); a class with no true and no
// predicted samples contributes 0.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels, int class_count);

// K x K counts with rows = ground truth, columns = prediction. Normalized
// rows sum to 1; all-zero rows stay zero.
Tensor<double> confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                         int class_count, bool normalize);

// Exact two-sided Wilcoxon signed-rank p-value from the full 2^n
// sign-assignment distribution; ties get average ranks, zero differences are
// dropped first. All differences zero gives p = 1.
double wilcoxon_exact(std::vector<double> differences);

}  // namespace ssda
