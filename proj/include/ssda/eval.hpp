#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "ssda/config.hpp"
#include "ssda/model.hpp"
#include "ssda/splits.hpp"
#include "ssda/types.hpp"

namespace ssda {

struct FoldReport {
  long fold = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  long n_train_labeled = 0;
  long n_train_unlabeled = 0;
  long n_test = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  Tensor<double> confusion_counts;      // K x K raw counts
  Tensor<double> confusion_normalized;  // rows sum to 1 where they occur
};

struct EvalReport {
  std::string experiment;  // free-form tag ("cv", "fraction-0.10", variant name)
  double label_fraction = 1.0;
  std::vector<std::string> ablation_flags;
  int class_count = 0;
  std::vector<FoldReport> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;

  void finalize();  // fills the aggregate fields from the folds
};

// Subject-independent cross-validation: per fold, mask the training labels,
// train, and score every trial of the held-out subjects. Aborts (throws) on
// subject leakage between a fold's train and test sets.
EvalReport run_cv(const std::vector<Trial>& dataset, const SplitPlan& plan, double label_fraction,
                  const ModelConfig& mcfg, const LossWeights& weights, const TrainConfig& tcfg,
                  long jobs = 1);

struct FractionRow {
  double fraction = 0.0;
  long n_labeled = 0;    // summed over folds
  long n_unlabeled = 0;  // summed over folds
  EvalReport report;
};

std::vector<FractionRow> label_fraction_experiment(const std::vector<Trial>& dataset,
                                                   const SplitPlan& plan,
                                                   const std::vector<double>& fractions,
                                                   const ModelConfig& mcfg,
                                                   const LossWeights& weights,
                                                   const TrainConfig& tcfg, long jobs = 1);

struct AblationRow {
  std::string variant;
  EvalReport report;
};

// Known variant flags: disable-attention, disable-lstm, disable-cnn,
// single-column-<k>, disable-center-loss, disable-ds-loss,
// disable-unsupervised, full.
void apply_variant(const std::string& flag, ModelConfig& mcfg, LossWeights& weights);

std::vector<AblationRow> ablate(const std::vector<Trial>& dataset, const SplitPlan& plan,
                                const std::vector<std::string>& variants, double label_fraction,
                                const ModelConfig& mcfg, const LossWeights& weights,
                                const TrainConfig& tcfg, long jobs = 1);

enum class ExportLayer { final_fc, concat_latent };

// Per-trial feature vectors with label and subject columns, as CSV.
void export_latents(const ParamStore<float>& params, const ModelConfig& mcfg,
                    const std::vector<const Trial*>& trials, ExportLayer layer, std::ostream& os);

// Report files: JSON (lossless, reload-able) plus flat CSV tables and
// per-fold confusion grids.
void save_eval_report(const EvalReport& report, const std::string& json_path);
EvalReport load_eval_report(const std::string& json_path);
void write_report_csv(const EvalReport& report, std::ostream& os);
void write_confusion_csv(const FoldReport& fold, std::ostream& os);

// Minimal raster renders (binary PPM): confusion heat map and a 2-D latent
// scatter colored by label.
void render_confusion_ppm(const Tensor<double>& normalized, const std::string& path);
void render_scatter_ppm(const std::vector<std::array<double, 2>>& points,
                        const std::vector<int>& labels, int class_count, const std::string& path);

}  // namespace ssda
