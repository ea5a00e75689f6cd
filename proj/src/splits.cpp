#include "ssda/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ssda/rng.hpp"

namespace ssda {

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

SplitPlan make_split_plan(std::vector<std::string> subjects, SplitKind kind, long folds,
                          uint64_t seed, long test_size, bool disjoint) {
  subjects = sorted_unique(std::move(subjects));
  long S = static_cast<long>(subjects.size());
  if (S < 2) throw std::runtime_error("make_split_plan: need at least 2 subjects");
  if (folds < 1) throw std::runtime_error("make_split_plan: need at least 1 fold");

  SplitPlan plan;
  plan.kind = kind;
  plan.seed = seed;

  auto complement = [&](const std::set<std::string>& test) {
    std::vector<std::string> train;
    for (const auto& s : subjects)
      if (!test.count(s)) train.push_back(s);
    return train;
  };

  if (kind == SplitKind::loso) {
    if (folds != S)
      throw std::runtime_error("make_split_plan: loso requires folds == subject count");
    for (const auto& s : subjects) {
      SplitFold f;
      f.test_subjects = {s};
      f.train_subjects = complement({s});
      plan.folds.push_back(std::move(f));
    }
    return plan;
  }

  Rng rng(seed);
  if (test_size == 0) {
    // Even partition: every subject tested exactly once.
    if (folds > S) throw std::runtime_error("make_split_plan: more folds than subjects");
    std::vector<std::string> pool = subjects;
    rng.shuffle(pool);
    std::vector<std::vector<std::string>> groups(static_cast<size_t>(folds));
    for (long i = 0; i < S; ++i)
      groups[static_cast<size_t>(i % folds)].push_back(pool[static_cast<size_t>(i)]);
    for (auto& g : groups) {
      std::sort(g.begin(), g.end());
      SplitFold f;
      f.test_subjects = g;
      f.train_subjects = complement(std::set<std::string>(g.begin(), g.end()));
      plan.folds.push_back(std::move(f));
    }
    return plan;
  }

  if (test_size >= S)
    throw std::runtime_error("make_split_plan: test_size must leave at least one train subject");
  if (disjoint && folds * test_size > S)
    throw std::runtime_error("make_split_plan: disjoint folds would exhaust the subject pool");

  if (disjoint) {
    std::vector<std::string> pool = subjects;
    rng.shuffle(pool);
    for (long k = 0; k < folds; ++k) {
      std::vector<std::string> test(pool.begin() + k * test_size,
                                    pool.begin() + (k + 1) * test_size);
      std::sort(test.begin(), test.end());
      SplitFold f;
      f.test_subjects = test;
      f.train_subjects = complement(std::set<std::string>(test.begin(), test.end()));
      plan.folds.push_back(std::move(f));
    }
  } else {
    // Independent draw per fold (one fold == one repetition).
    for (long k = 0; k < folds; ++k) {
      std::vector<std::string> pool = subjects;
      rng.shuffle(pool);
      std::vector<std::string> test(pool.begin(), pool.begin() + test_size);
      std::sort(test.begin(), test.end());
      SplitFold f;
      f.test_subjects = test;
      f.train_subjects = complement(std::set<std::string>(test.begin(), test.end()));
      plan.folds.push_back(std::move(f));
    }
  }
  return plan;
}

LabelMask apply_label_mask(const std::vector<std::string>& trial_ids,
                           const std::vector<int>& labels, double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::runtime_error("apply_label_mask: fraction must be in (0, 1]");
  if (!labels.empty() && labels.size() != trial_ids.size())
    throw std::runtime_error("apply_label_mask: labels size mismatch");

  long n = static_cast<long>(trial_ids.size());
  long target = static_cast<long>(std::llround(fraction * static_cast<double>(n)));
  target = std::clamp<long>(target, 0, n);
  if (fraction == 1.0) target = n;

  LabelMask mask;
  mask.fraction = fraction;

  // Group indices by class (-1 and label-free ids form one pool).
  std::map<int, std::vector<long>> by_class;
  for (long i = 0; i < n; ++i) {
    int cls = labels.empty() ? -1 : labels[static_cast<size_t>(i)];
    by_class[cls].push_back(i);
  }

  Rng rng(seed);
  for (auto& [cls, idx] : by_class) {
    (void)cls;
    rng.shuffle(idx);
  }

  // Largest-remainder quotas per class, keeping every class represented when
  // the budget allows (degenerate center-loss batches otherwise).
  std::vector<int> classes;
  for (const auto& [cls, idx] : by_class) {
    (void)idx;
    classes.push_back(cls);
  }
  std::map<int, long> quota;
  long assigned = 0;
  std::vector<std::pair<double, int>> remainders;
  for (int cls : classes) {
    double exact = fraction * static_cast<double>(by_class[cls].size());
    long q = static_cast<long>(std::floor(exact));
    quota[cls] = q;
    assigned += q;
    remainders.push_back({exact - static_cast<double>(q), cls});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    int cls = remainders[i].second;
    if (quota[cls] < static_cast<long>(by_class[cls].size())) {
      ++quota[cls];
      ++assigned;
    }
  }
  // Rounding there can still undershoot when some classes saturate.
  for (int cls : classes) {
    while (assigned < target && quota[cls] < static_cast<long>(by_class[cls].size())) {
      ++quota[cls];
      ++assigned;
    }
  }
  // Guarantee one labeled trial per real class when the budget covers them.
  long real_classes = 0;
  for (int cls : classes)
    if (cls >= 0) ++real_classes;
  if (target >= real_classes) {
    for (int cls : classes) {
      if (cls < 0 || quota[cls] > 0 || by_class[cls].empty()) continue;
      // steal one from the largest-quota class
      int donor = -1;
      long best = 1;
      for (int c2 : classes)
        if (quota[c2] > best) {
          best = quota[c2];
          donor = c2;
        }
      if (donor != -1) {
        --quota[donor];
        ++quota[cls];
      }
    }
  }

  for (int cls : classes) {
    const auto& idx = by_class[cls];
    long q = quota[cls];
    for (long i = 0; i < static_cast<long>(idx.size()); ++i) {
      const std::string& id = trial_ids[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      if (i < q)
        mask.labeled_ids.insert(id);
      else
        mask.unlabeled_ids.insert(id);
    }
  }
  return mask;
}

void save_split_plan(const SplitPlan& plan, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_split_plan: cannot open '" + path + "'");
  f << "# kind=" << to_string(plan.kind) << " seed=" << plan.seed << "\n";
  for (size_t i = 0; i < plan.folds.size(); ++i) {
    f << i << "\ttrain=";
    const auto& fold = plan.folds[i];
    for (size_t j = 0; j < fold.train_subjects.size(); ++j)
      f << (j ? "," : "") << fold.train_subjects[j];
    f << "\ttest=";
    for (size_t j = 0; j < fold.test_subjects.size(); ++j)
      f << (j ? "," : "") << fold.test_subjects[j];
    f << "\n";
  }
}

SplitPlan load_split_plan(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_split_plan: cannot open '" + path + "'");
  SplitPlan plan;
  std::string line;
  auto split_list = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto kpos = line.find("kind=");
      auto spos = line.find("seed=");
      if (kpos != std::string::npos) {
        std::string kind = line.substr(kpos + 5);
        kind = kind.substr(0, kind.find(' '));
        plan.kind = parse_split_kind(kind);
      }
      if (spos != std::string::npos)
        plan.seed = static_cast<uint64_t>(std::stoull(line.substr(spos + 5)));
      continue;
    }
    auto t1 = line.find("\ttrain=");
    auto t2 = line.find("\ttest=");
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("load_split_plan: malformed line '" + line + "'");
    SplitFold fold;
    fold.train_subjects = split_list(line.substr(t1 + 7, t2 - (t1 + 7)));
    fold.test_subjects = split_list(line.substr(t2 + 6));
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace ssda
