#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ssda/tensor.hpp"

namespace ssda {

// One epoched motor-imagery trial: C channels x T samples, microvolts.
struct Trial {
  std::string subject_id;
  std::string trial_id;  // "subject/session/index"
  long channels = 0;
  long samples = 0;
  std::vector<double> data;  // row-major C x T
  int label = -1;            // class index, -1 = unlabeled
  int class_count = 0;

  bool has_label() const { return label >= 0; }
  double& at(long c, long t) { return data[static_cast<size_t>(c * samples + t)]; }
  double at(long c, long t) const { return data[static_cast<size_t>(c * samples + t)]; }
};

// The n temporal slices of one trial produced by the sliding window.
struct WindowSequence {
  std::string source_trial_id;
  long channels = 0;
  long window_len = 0;  // m
  long step = 0;        // p
  std::vector<Tensor<double>> windows;  // each C x m

  long count() const { return static_cast<long>(windows.size()); }
};

// Per-column layer parameters (encoder conv/pool/LSTM, decoder LSTM/convs).
struct ColumnSpec {
  long conv_filters = 0;
  long conv_kernel = 0;  // kernel width; kernel height always equals C
  long pool = 0;
  double dropout = 0.5;
  long enc_lstm_units = 0;
  double enc_lstm_dropout = 0.0;
  long dec_lstm_units = 0;
  double dec_lstm_dropout = 0.0;
  long dec_reshape_rows = 0;
  long dec_reshape_cols = 0;
  long dec_conv_filters = 0;
};

struct ModelConfig {
  long channels = 0;       // C
  long window_len = 0;     // m
  long step = 0;           // p
  long upsample_rows = 0;  // U
  int class_count = 0;     // K
  std::vector<ColumnSpec> columns;
  long fc_hidden = 128;
  double l2_factor = 0.0005;

  // Ablation switches: stages can be replaced by pass-throughs and the model
  // restricted to a single column. 0 = all columns; otherwise 1-based index.
  bool use_cnn = true;
  bool use_lstm = true;
  bool use_attention = true;
  int only_column = 0;

  long column_count() const { return static_cast<long>(columns.size()); }

  // Width of the flattened per-window feature vector entering the encoder
  // LSTM of column `ci` (valid conv then floor pooling).
  long flatten_width(long ci) const {
    const ColumnSpec& cs = columns[static_cast<size_t>(ci)];
    if (!use_cnn) return cs.conv_filters * ((window_len - cs.conv_kernel + 1) / cs.pool);
    long conv_w = window_len - cs.conv_kernel + 1;
    return cs.conv_filters * (conv_w / cs.pool);
  }

  // Latent width of column `ci` (the attention output v).
  long latent_width(long ci) const {
    if (use_lstm) return columns[static_cast<size_t>(ci)].enc_lstm_units;
    return flatten_width(ci);
  }

  std::vector<long> active_columns() const {
    std::vector<long> out;
    for (long i = 0; i < column_count(); ++i)
      if (only_column == 0 || only_column == i + 1) out.push_back(i);
    return out;
  }

  long concat_latent_width() const {
    long w = 0;
    for (long i : active_columns()) w += latent_width(i);
    return w;
  }

  static ModelConfig paper_physionet();
  static ModelConfig paper_bci2a();
};

// Constant weights of the composite loss: beta (MSE), eta (DS), gamma (center).
struct LossWeights {
  std::vector<double> beta;
  std::vector<double> eta;
  double gamma = 0.0;
};

enum class SplitKind { kfold_subjects, loso };

SplitKind parse_split_kind(const std::string& s);  // throws on unknown kind
std::string to_string(SplitKind k);

struct SplitFold {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

struct SplitPlan {
  SplitKind kind = SplitKind::kfold_subjects;
  uint64_t seed = 0;
  std::vector<SplitFold> folds;
};

// Partition of the training trial ids into labeled (l) and unlabeled (u).
struct LabelMask {
  std::set<std::string> labeled_ids;
  std::set<std::string> unlabeled_ids;
  double fraction = 1.0;

  bool is_labeled(const std::string& id) const { return labeled_ids.count(id) > 0; }
};

struct TrainConfig {
  long epochs = 250;
  double learning_rate = 1e-5;
  long batch_size = 32;
  double val_fraction = 0.10;
  uint64_t seed = 0;
  double center_alpha = 0.5;
  long min_labeled_per_batch = 0;

  // DS loss options
  bool ds_normalize = true;
  long ds_pair_budget = 0;  // 0 = all in-batch pairs

  // Grid search over (beta, eta, gamma)
  double grid_min = 0.0;
  double grid_max = 0.5;
  double grid_step = 0.1;
  long grid_cap = 216;
  bool grid_full_factorial = false;
};

struct SynthSpec {
  long subject_count = 1;
  long trials_per_subject = 1;
  long channels = 1;
  long samples = 1;
  int class_count = 2;
  // Linear signal-to-noise power ratio; 0 means pure noise, and any value
  // >= kSnrClean is treated as noise-free.
  double snr = 4.0;
  // Strength of the per-subject random mixing applied to the class patterns
  // (0 = every subject shares the exact same spatial patterns).
  double subject_mixing = 0.25;
  uint64_t seed = 0;

  static constexpr double kSnrClean = 1e12;
};

struct Annotation {
  double onset_s = 0.0;
  std::string label;
};

// Continuous multichannel recording in physical units.
struct Recording {
  std::vector<std::string> channel_labels;
  double fs = 0.0;  // Hz, shared by all channels
  long channels = 0;
  long length = 0;               // samples per channel
  std::vector<double> signals;   // row-major C x L
  std::vector<Annotation> annotations;

  double& at(long c, long t) { return signals[static_cast<size_t>(c * length + t)]; }
  double at(long c, long t) const { return signals[static_cast<size_t>(c * length + t)]; }
};

}  // namespace ssda
