#pragma once

#include <string>
#include <vector>

#include "ssda/types.hpp"

namespace ssda {

// Builds the cross-validation plan over subject ids.
//
// kfold with test_size == 0: subjects are shuffled once and dealt into
// `folds` groups of near-equal size; every subject is tested exactly once.
// kfold with test_size > 0: each fold draws `test_size` test subjects, by
// default independently per fold (the repetition protocol); with
// disjoint == true the draws do not overlap across folds.
// loso: `folds` must equal the subject count; each subject is the (single)
// test subject of exactly one fold.
SplitPlan make_split_plan(std::vector<std::string> subjects, SplitKind kind, long folds,
                          uint64_t seed, long test_size = 0, bool disjoint = false);

// Partitions `trial_ids` into labeled/unlabeled with |labeled| =
// round(fraction * N). When `labels` is non-empty (one class per id, -1
// unknown) the draw is stratified so every class keeps at least one labeled
// trial whenever the budget allows.
LabelMask apply_label_mask(const std::vector<std::string>& trial_ids,
                           const std::vector<int>& labels, double fraction, uint64_t seed);

// Plain-text manifest: one fold per line (index, train subjects, test
// subjects).
void save_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan load_split_plan(const std::string& path);

}  // namespace ssda
