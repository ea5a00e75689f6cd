// ssda: subject-independent semi-supervised EEG motor-imagery toolkit.
//
// Subcommands: ingest, train, eval, ablate, gradcheck, export, report.
// Exit codes: 0 success, 1 usage/config error, 2 data error,
// 3 verification failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>

#include "ssda/config.hpp"
#include "ssda/dataset.hpp"
#include "ssda/edf.hpp"
#include "ssda/eval.hpp"
#include "ssda/manifest.hpp"
#include "ssda/metrics.hpp"
#include "ssda/splits.hpp"
#include "ssda/synth.hpp"
#include "ssda/train.hpp"

namespace fs = std::filesystem;
using namespace ssda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerification = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load_and_validate_config(const std::string& path) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  auto violations = validate_config(cfg.model);
  if (!violations.empty()) {
    std::string msg = "config '" + path + "' is invalid:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw UsageError(msg);
  }
  return cfg;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "S001R04" -> ("S001", "R04"); anything else keeps the stem as subject.
std::pair<std::string, std::string> subject_session_from_stem(const std::string& stem) {
  static const std::regex physionet("^([A-Za-z]+\\d+)(R\\d+)$");
  std::smatch m;
  if (std::regex_match(stem, m, physionet)) return {m[1], m[2]};
  return {stem, "r0"};
}

SynthSpec parse_synth_spec(const std::string& s) {
  SynthSpec spec;
  for (const auto& kv : parse_string_list(s)) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--synth entries must look like key=value");
    std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "subjects") spec.subject_count = std::stol(v);
    else if (k == "trials") spec.trials_per_subject = std::stol(v);
    else if (k == "channels") spec.channels = std::stol(v);
    else if (k == "samples") spec.samples = std::stol(v);
    else if (k == "classes") spec.class_count = std::stoi(v);
    else if (k == "snr") spec.snr = v == "inf" ? SynthSpec::kSnrClean : std::stod(v);
    else if (k == "mixing") spec.subject_mixing = std::stod(v);
    else if (k == "seed") spec.seed = std::stoull(v);
    else throw UsageError("--synth: unknown key '" + k + "'");
  }
  return spec;
}

std::vector<std::string> dataset_subjects(const std::vector<Trial>& trials,
                                          const std::vector<std::string>& exclude) {
  std::set<std::string> ex(exclude.begin(), exclude.end());
  std::set<std::string> subj;
  for (const auto& t : trials)
    if (!ex.count(t.subject_id)) subj.insert(t.subject_id);
  return {subj.begin(), subj.end()};
}

std::vector<Trial> load_dataset_checked(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("dataset: no such file '" + path + "'");
  auto trials = load_dataset(path);
  if (trials.empty()) throw std::runtime_error("dataset '" + path + "' holds no trials");
  return trials;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& config_path, const std::vector<std::string>& edf_paths,
               const std::vector<std::string>& array_paths, const std::string& synth_desc,
               const std::string& out_path) {
  RunConfig cfg = load_and_validate_config(config_path);

  std::vector<Trial> all;
  long dropped = 0;
  if (!synth_desc.empty()) {
    auto [trials, gt] = synth_generate(parse_synth_spec(synth_desc));
    (void)gt;
    all = std::move(trials);
  }
  for (const auto& group : {std::make_pair(&edf_paths, true), std::make_pair(&array_paths, false)}) {
    for (const auto& path : *group.first) {
      if (!fs::exists(path)) throw std::runtime_error("ingest: no such file '" + path + "'");
      Recording rec = group.second ? read_edf(path) : read_array_file(path);
      auto [subject, session] = subject_session_from_stem(fs::path(path).stem().string());
      if (cfg.event_map.empty() || cfg.duration_s <= 0)
        throw UsageError("ingest: config must define event_map and duration_s for recordings");
      auto res = epoch(rec, cfg.event_map, cfg.duration_s, subject, session, cfg.onset_offset_ms);
      dropped += res.dropped;
      for (auto& t : res.trials) all.push_back(std::move(t));
    }
  }
  if (all.empty()) throw std::runtime_error("ingest: no trials produced");
  save_dataset(all, out_path);
  std::set<std::string> subjects;
  for (const auto& t : all) subjects.insert(t.subject_id);
  std::cout << "wrote " << all.size() << " trials from " << subjects.size() << " subjects to "
            << out_path << "\n";
  if (dropped > 0) std::cout << "warning: dropped " << dropped << " out-of-range trials\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& out_dir, long seed_override) {
  RunConfig cfg = load_and_validate_config(config_path);
  if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);

  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = cfg.train.seed;
  manifest.config_text = config_to_text(cfg);
  manifest.started_at = timestamp_utc();
  manifest.inputs = {{config_path, fnv1a_file_digest(config_path)},
                     {dataset_path, fnv1a_file_digest(dataset_path)}};
  std::string manifest_path = out_dir + "/manifest.txt";
  write_manifest(manifest, manifest_path);
  {
    std::ofstream rc(out_dir + "/config.resolved.cfg", std::ios::binary);
    rc << manifest.config_text;
  }

  auto trials = load_dataset_checked(dataset_path);
  std::vector<const Trial*> tptr;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::set<std::string> ex(cfg.subject_exclude.begin(), cfg.subject_exclude.end());
  for (const auto& t : trials) {
    if (ex.count(t.subject_id)) continue;
    tptr.push_back(&t);
    ids.push_back(t.trial_id);
    labels.push_back(t.label);
  }
  LabelMask mask = apply_label_mask(ids, labels, cfg.label_fraction, cfg.train.seed);

  std::ofstream log(out_dir + "/train_log.csv", std::ios::binary);
  auto result = train<float>(tptr, mask, cfg.model, cfg.weights, cfg.train, &log);

  save_checkpoint(result.best_params, cfg, out_dir + "/checkpoint.best.ssck");
  save_checkpoint(result.final_params, cfg, out_dir + "/checkpoint.final.ssck");

  manifest.outputs = {out_dir + "/train_log.csv", out_dir + "/checkpoint.best.ssck",
                      out_dir + "/checkpoint.final.ssck"};
  manifest.finished_at = timestamp_utc();
  manifest.status = "ok";
  write_manifest(manifest, manifest_path);

  std::cout << "trained " << cfg.train.epochs << " epochs; best epoch "
            << result.history.best_epoch << " with validation accuracy "
            << result.history.best_val_accuracy << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& dataset_path,
             const std::string& out_dir, const std::string& fractions_arg, long jobs,
             long seed_override) {
  RunConfig cfg = load_and_validate_config(config_path);
  if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);

  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "eval";
  manifest.seed = cfg.train.seed;
  manifest.config_text = config_to_text(cfg);
  manifest.started_at = timestamp_utc();
  manifest.inputs = {{config_path, fnv1a_file_digest(config_path)},
                     {dataset_path, fnv1a_file_digest(dataset_path)}};
  std::string manifest_path = out_dir + "/manifest.txt";
  write_manifest(manifest, manifest_path);

  auto trials = load_dataset_checked(dataset_path);
  auto subjects = dataset_subjects(trials, cfg.subject_exclude);
  long folds = cfg.split_kind == SplitKind::loso ? static_cast<long>(subjects.size())
                                                 : cfg.split_folds;
  SplitPlan plan = make_split_plan(subjects, cfg.split_kind, folds, cfg.train.seed,
                                   cfg.split_test_size, cfg.split_disjoint);
  save_split_plan(plan, out_dir + "/split_plan.txt");
  manifest.outputs.push_back(out_dir + "/split_plan.txt");

  if (!fractions_arg.empty()) {
    auto fractions = parse_double_list(fractions_arg);
    auto rows = label_fraction_experiment(trials, plan, fractions, cfg.model, cfg.weights,
                                          cfg.train, jobs);
    std::ofstream csv(out_dir + "/fractions.csv", std::ios::binary);
    csv.precision(9);
    csv << "fraction,n_labeled,n_unlabeled,mean_accuracy,std_accuracy,mean_f1,std_f1\n";
    for (const auto& row : rows) {
      csv << row.fraction << ',' << row.n_labeled << ',' << row.n_unlabeled << ','
          << row.report.mean_accuracy << ',' << row.report.std_accuracy << ','
          << row.report.mean_f1 << ',' << row.report.std_f1 << "\n";
      std::string jpath = out_dir + "/eval_report_fraction_" + std::to_string(row.fraction) + ".json";
      save_eval_report(row.report, jpath);
      manifest.outputs.push_back(jpath);
    }
    manifest.outputs.push_back(out_dir + "/fractions.csv");
  } else {
    EvalReport report = run_cv(trials, plan, cfg.label_fraction, cfg.model, cfg.weights,
                               cfg.train, jobs);
    save_eval_report(report, out_dir + "/eval_report.json");
    std::ofstream csv(out_dir + "/report.csv", std::ios::binary);
    write_report_csv(report, csv);
    for (const auto& fold : report.folds) {
      std::ofstream cf(out_dir + "/confusion_fold" + std::to_string(fold.fold) + ".csv",
                       std::ios::binary);
      write_confusion_csv(fold, cf);
    }
    manifest.outputs.push_back(out_dir + "/eval_report.json");
    manifest.outputs.push_back(out_dir + "/report.csv");
    std::cout << "cv complete: mean accuracy " << report.mean_accuracy << " +- "
              << report.std_accuracy << ", mean F1 " << report.mean_f1 << "\n";
  }

  manifest.finished_at = timestamp_utc();
  manifest.status = "ok";
  write_manifest(manifest, manifest_path);
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& dataset_path,
               const std::string& out_dir, const std::string& variants_arg, long jobs,
               long seed_override) {
  RunConfig cfg = load_and_validate_config(config_path);
  if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);
  auto variants = parse_string_list(variants_arg);
  if (variants.empty()) throw UsageError("ablate: --variants must list at least one variant");
  // Validate flags before any compute.
  for (const auto& v : variants) {
    ModelConfig m = cfg.model;
    LossWeights w = cfg.weights;
    try {
      apply_variant(v, m, w);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }

  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "ablate";
  manifest.seed = cfg.train.seed;
  manifest.config_text = config_to_text(cfg);
  manifest.started_at = timestamp_utc();
  manifest.inputs = {{config_path, fnv1a_file_digest(config_path)},
                     {dataset_path, fnv1a_file_digest(dataset_path)}};
  write_manifest(manifest, out_dir + "/manifest.txt");

  auto trials = load_dataset_checked(dataset_path);
  auto subjects = dataset_subjects(trials, cfg.subject_exclude);
  long folds = cfg.split_kind == SplitKind::loso ? static_cast<long>(subjects.size())
                                                 : cfg.split_folds;
  SplitPlan plan = make_split_plan(subjects, cfg.split_kind, folds, cfg.train.seed,
                                   cfg.split_test_size, cfg.split_disjoint);
  save_split_plan(plan, out_dir + "/split_plan.txt");

  auto rows = ablate(trials, plan, variants, cfg.label_fraction, cfg.model, cfg.weights,
                     cfg.train, jobs);
  std::ofstream csv(out_dir + "/ablation.csv", std::ios::binary);
  csv.precision(9);
  csv << "variant,mean_accuracy,std_accuracy,mean_f1,std_f1\n";
  for (const auto& row : rows) {
    csv << row.variant << ',' << row.report.mean_accuracy << ',' << row.report.std_accuracy << ','
        << row.report.mean_f1 << ',' << row.report.std_f1 << "\n";
    save_eval_report(row.report, out_dir + "/eval_report_" + row.variant + ".json");
  }

  manifest.outputs = {out_dir + "/ablation.csv"};
  manifest.finished_at = timestamp_utc();
  manifest.status = "ok";
  write_manifest(manifest, out_dir + "/manifest.txt");
  std::cout << "ablation table written with " << rows.size() << " variants\n";
  return kExitOk;
}

int cmd_gradcheck(double eps, double tol, const std::string& selectors_arg,
                  const std::string& out_path) {
  ModelConfig cfg = miniature_config();
  LossWeights weights;
  weights.beta = {0.2, 0.1};
  weights.eta = {0.1, 0.1};
  weights.gamma = 0.3;
  TrainConfig tc;

  auto selectors = parse_string_list(selectors_arg);
  if (selectors.empty()) selectors = {"ce", "center", "mse", "ds", "total"};

  std::ostringstream out;
  bool ok = true;
  for (const auto& sel : selectors) {
    auto report = grad_check(cfg, weights, tc, sel, eps, 2024);
    bool pass = report.passed(tol);
    ok = ok && pass;
    out << "loss " << sel << ": max relative error " << report.max_rel_err << " -> "
        << (pass ? "PASS" : "FAIL") << "\n";
    for (const auto& e : report.entries)
      if (e.rel_err >= tol) out << "  " << e.param << ": " << e.rel_err << "\n";
  }
  std::cout << out.str();
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    f << out.str();
  }
  return ok ? kExitOk : kExitVerification;
}

int cmd_export(const std::string& checkpoint_path, const std::string& dataset_path,
               const std::string& layer_arg, const std::string& out_path) {
  auto [params, cfg] = load_checkpoint(checkpoint_path);
  auto trials = load_dataset_checked(dataset_path);
  std::vector<const Trial*> tptr;
  for (const auto& t : trials) tptr.push_back(&t);
  ExportLayer layer;
  if (layer_arg == "final-fc") layer = ExportLayer::final_fc;
  else if (layer_arg == "concat-latent") layer = ExportLayer::concat_latent;
  else throw UsageError("export: --layer must be final-fc or concat-latent");
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("export: cannot open '" + out_path + "'");
  export_latents(params, cfg.model, tptr, layer, out);
  std::cout << "wrote " << trials.size() << " vectors to " << out_path << "\n";
  return kExitOk;
}

int cmd_report(const std::string& report_path, const std::string& out_dir, bool plots) {
  EvalReport report = load_eval_report(report_path);
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir + "/report.csv", std::ios::binary);
  write_report_csv(report, csv);
  for (const auto& fold : report.folds) {
    std::ofstream cf(out_dir + "/confusion_fold" + std::to_string(fold.fold) + ".csv",
                     std::ios::binary);
    write_confusion_csv(fold, cf);
    if (plots)
      render_confusion_ppm(fold.confusion_normalized,
                           out_dir + "/confusion_fold" + std::to_string(fold.fold) + ".ppm");
  }
  std::cout << "report tables written to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subject-independent semi-supervised EEG motor-imagery toolkit"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_path, synth_desc, fractions, variants, selectors;
  std::string checkpoint_path, layer = "final-fc", report_path;
  std::vector<std::string> edf_paths, array_paths;
  long jobs = 1;
  long seed_override = -1;
  double eps = 1e-5, tol = 1e-4;
  bool plots = false;

  auto* ingest = app.add_subcommand("ingest", "parse recordings / generate synthetic trials");
  ingest->add_option("--config", config_path, "config file")->required();
  ingest->add_option("--edf", edf_paths, "EDF recordings");
  ingest->add_option("--array", array_paths, "EEGA array recordings");
  ingest->add_option("--synth", synth_desc, "synthetic spec, e.g. subjects=3,trials=20,...");
  ingest->add_option("--out", out_path, "output dataset file")->required();

  auto* train_cmd = app.add_subcommand("train", "train on a dataset");
  train_cmd->add_option("--config", config_path, "config file")->required();
  train_cmd->add_option("--dataset", dataset_path, "dataset file")->required();
  train_cmd->add_option("--out", out_path, "run directory")->required();
  train_cmd->add_option("--seed", seed_override, "seed override");

  auto* eval_cmd = app.add_subcommand("eval", "subject-independent cross-validation");
  eval_cmd->add_option("--config", config_path, "config file")->required();
  eval_cmd->add_option("--dataset", dataset_path, "dataset file")->required();
  eval_cmd->add_option("--out", out_path, "run directory")->required();
  eval_cmd->add_option("--fractions", fractions, "label fractions, e.g. 0.03,0.10,0.30");
  eval_cmd->add_option("--jobs", jobs, "parallel folds (default 1)");
  eval_cmd->add_option("--seed", seed_override, "seed override");

  auto* ablate_cmd = app.add_subcommand("ablate", "train architecture/loss variants");
  ablate_cmd->add_option("--config", config_path, "config file")->required();
  ablate_cmd->add_option("--dataset", dataset_path, "dataset file")->required();
  ablate_cmd->add_option("--out", out_path, "run directory")->required();
  ablate_cmd->add_option("--variants", variants, "comma-separated variant flags")->required();
  ablate_cmd->add_option("--jobs", jobs, "parallel folds (default 1)");
  ablate_cmd->add_option("--seed", seed_override, "seed override");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  grad_cmd->add_option("--eps", eps, "central difference step (default 1e-5)");
  grad_cmd->add_option("--tol", tol, "max relative error (default 1e-4)");
  grad_cmd->add_option("--selectors", selectors, "loss terms (default ce,center,mse,ds,total)");
  grad_cmd->add_option("--out", out_path, "optional report file");

  auto* export_cmd = app.add_subcommand("export", "per-trial feature vectors as CSV");
  export_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  export_cmd->add_option("--dataset", dataset_path, "dataset file")->required();
  export_cmd->add_option("--layer", layer, "final-fc | concat-latent");
  export_cmd->add_option("--out", out_path, "output CSV")->required();

  auto* report_cmd = app.add_subcommand("report", "re-render tables/plots from a report JSON");
  report_cmd->add_option("--report", report_path, "eval_report.json")->required();
  report_cmd->add_option("--out", out_path, "output directory")->required();
  report_cmd->add_flag("--plots", plots, "also write raster plots");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed())
      return cmd_ingest(config_path, edf_paths, array_paths, synth_desc, out_path);
    if (train_cmd->parsed()) return cmd_train(config_path, dataset_path, out_path, seed_override);
    if (eval_cmd->parsed())
      return cmd_eval(config_path, dataset_path, out_path, fractions, jobs, seed_override);
    if (ablate_cmd->parsed())
      return cmd_ablate(config_path, dataset_path, out_path, variants, jobs, seed_override);
    if (grad_cmd->parsed()) return cmd_gradcheck(eps, tol, selectors, out_path);
    if (export_cmd->parsed())
      return cmd_export(checkpoint_path, dataset_path, layer, out_path);
    if (report_cmd->parsed()) return cmd_report(report_path, out_path, plots);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
