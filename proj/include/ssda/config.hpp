#pragma once

#include <map>
#include <string>
#include <vector>

#include "ssda/types.hpp"

namespace ssda {

// Everything a run needs, resolved from one flat key=value config file.
struct RunConfig {
  ModelConfig model;
  LossWeights weights;
  TrainConfig train;

  // split settings
  SplitKind split_kind = SplitKind::kfold_subjects;
  long split_folds = 10;
  long split_test_size = 0;  // 0 = even partition of all subjects
  bool split_disjoint = false;
  double label_fraction = 1.0;
  std::vector<std::string> subject_exclude;

  // ingest settings
  std::map<std::string, int> event_map;  // annotation label -> class index
  double duration_s = 0.0;
  double onset_offset_ms = 0.0;
};

// Parses the flat key=value format ('#' comments, blank lines ignored).
// Unknown keys are an error: typos must not be silently absorbed.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Serializes every key in a fixed order; parse(serialize(c)) == c.
std::string config_to_text(const RunConfig& cfg);

// Returns one human-readable violation per broken ModelConfig invariant;
// empty means the config is valid.
std::vector<std::string> validate_config(const ModelConfig& cfg);

}  // namespace ssda
