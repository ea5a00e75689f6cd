#include "ssda/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ssda/metrics.hpp"
#include "ssda/train.hpp"

namespace ssda {

namespace {

using json = nlohmann::ordered_json;

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

FoldReport run_fold(long fold_index, const SplitFold& fold, const std::vector<Trial>& dataset,
                    double label_fraction, const ModelConfig& mcfg, const LossWeights& weights,
                    const TrainConfig& tcfg) {
  std::set<std::string> train_set(fold.train_subjects.begin(), fold.train_subjects.end());
  std::set<std::string> test_set(fold.test_subjects.begin(), fold.test_subjects.end());
  for (const auto& s : test_set)
    if (train_set.count(s))
      throw std::runtime_error("run_cv: subject leakage in fold " + std::to_string(fold_index) +
                               ": '" + s + "' appears in both train and test");

  std::vector<const Trial*> train_trials, test_trials;
  for (const auto& t : dataset) {
    if (train_set.count(t.subject_id)) train_trials.push_back(&t);
    if (test_set.count(t.subject_id)) test_trials.push_back(&t);
  }
  check(!train_trials.empty(), "run_cv: fold " + std::to_string(fold_index) + " has no train trials");
  check(!test_trials.empty(), "run_cv: fold " + std::to_string(fold_index) + " has no test trials");

  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const Trial* t : train_trials) {
    ids.push_back(t->trial_id);
    labels.push_back(t->label);
  }
  LabelMask mask =
      apply_label_mask(ids, labels, label_fraction, mix_seed(tcfg.seed, 500 + fold_index));

  TrainConfig fold_tc = tcfg;
  fold_tc.seed = mix_seed(tcfg.seed, 1000 + fold_index);
  TrainResult<float> tr = train<float>(train_trials, mask, mcfg, weights, fold_tc);

  std::vector<int> preds = predict(tr.best_params, mcfg, test_trials);
  std::vector<int> truth;
  for (const Trial* t : test_trials) truth.push_back(t->label);

  FoldReport fr;
  fr.fold = fold_index;
  fr.train_subjects = fold.train_subjects;
  fr.test_subjects = fold.test_subjects;
  fr.n_train_labeled = static_cast<long>(mask.labeled_ids.size());
  fr.n_train_unlabeled = static_cast<long>(mask.unlabeled_ids.size());
  fr.n_test = static_cast<long>(test_trials.size());
  fr.accuracy = accuracy(preds, truth);
  fr.macro_f1 = macro_f1(preds, truth, mcfg.class_count);
  fr.confusion_counts = confusion(preds, truth, mcfg.class_count, false);
  fr.confusion_normalized = confusion(preds, truth, mcfg.class_count, true);
  return fr;
}

}  // namespace

void EvalReport::finalize() {
  if (folds.empty()) return;
  double sa = 0, sf = 0;
  for (const auto& f : folds) {
    sa += f.accuracy;
    sf += f.macro_f1;
  }
  mean_accuracy = sa / static_cast<double>(folds.size());
  mean_f1 = sf / static_cast<double>(folds.size());
  double va = 0, vf = 0;
  for (const auto& f : folds) {
    va += (f.accuracy - mean_accuracy) * (f.accuracy - mean_accuracy);
    vf += (f.macro_f1 - mean_f1) * (f.macro_f1 - mean_f1);
  }
  std_accuracy = std::sqrt(va / static_cast<double>(folds.size()));
  std_f1 = std::sqrt(vf / static_cast<double>(folds.size()));
}

EvalReport run_cv(const std::vector<Trial>& dataset, const SplitPlan& plan, double label_fraction,
                  const ModelConfig& mcfg, const LossWeights& weights, const TrainConfig& tcfg,
                  long jobs) {
  check(!dataset.empty(), "run_cv: empty dataset");
  std::set<std::string> dataset_subjects;
  for (const auto& t : dataset) dataset_subjects.insert(t.subject_id);
  for (const auto& fold : plan.folds)
    for (const auto& s : fold.test_subjects)
      check(dataset_subjects.count(s) > 0, "run_cv: plan subject '" + s + "' not in dataset");

  EvalReport report;
  report.experiment = "cv";
  report.label_fraction = label_fraction;
  report.class_count = mcfg.class_count;

  long nf = static_cast<long>(plan.folds.size());
  report.folds.resize(static_cast<size_t>(nf));
  if (jobs <= 1) {
    for (long k = 0; k < nf; ++k)
      report.folds[static_cast<size_t>(k)] = run_fold(k, plan.folds[static_cast<size_t>(k)],
                                                      dataset, label_fraction, mcfg, weights, tcfg);
  } else {
    // Folds are independent tasks with isolated RNG streams; the report
    // order is fixed by fold index regardless of completion order.
    std::vector<std::future<FoldReport>> futures;
    for (long k = 0; k < nf; ++k)
      futures.push_back(std::async(std::launch::async, [&, k] {
        return run_fold(k, plan.folds[static_cast<size_t>(k)], dataset, label_fraction, mcfg,
                        weights, tcfg);
      }));
    for (long k = 0; k < nf; ++k) report.folds[static_cast<size_t>(k)] = futures[static_cast<size_t>(k)].get();
  }
  report.finalize();
  return report;
}

std::vector<FractionRow> label_fraction_experiment(const std::vector<Trial>& dataset,
                                                   const SplitPlan& plan,
                                                   const std::vector<double>& fractions,
                                                   const ModelConfig& mcfg,
                                                   const LossWeights& weights,
                                                   const TrainConfig& tcfg, long jobs) {
  std::vector<FractionRow> rows;
  for (double f : fractions) {
    FractionRow row;
    row.fraction = f;
    row.report = run_cv(dataset, plan, f, mcfg, weights, tcfg, jobs);
    row.report.experiment = "fraction-" + std::to_string(f);
    row.report.label_fraction = f;
    for (const auto& fold : row.report.folds) {
      row.n_labeled += fold.n_train_labeled;
      row.n_unlabeled += fold.n_train_unlabeled;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void apply_variant(const std::string& flag, ModelConfig& mcfg, LossWeights& weights) {
  if (flag == "full") return;
  if (flag == "disable-attention") {
    mcfg.use_attention = false;
  } else if (flag == "disable-lstm") {
    mcfg.use_lstm = false;
  } else if (flag == "disable-cnn") {
    mcfg.use_cnn = false;
  } else if (flag == "disable-center-loss") {
    weights.gamma = 0.0;
  } else if (flag == "disable-ds-loss") {
    std::fill(weights.eta.begin(), weights.eta.end(), 0.0);
  } else if (flag == "disable-unsupervised") {
    std::fill(weights.beta.begin(), weights.beta.end(), 0.0);
    std::fill(weights.eta.begin(), weights.eta.end(), 0.0);
  } else if (flag.rfind("single-column-", 0) == 0) {
    int k = 0;
    try {
      k = std::stoi(flag.substr(14));
    } catch (...) {
      throw std::runtime_error("ablate: bad column index in '" + flag + "'");
    }
    check(k >= 1 && k <= static_cast<int>(mcfg.columns.size()),
          "ablate: column index out of range in '" + flag + "'");
    mcfg.only_column = k;
  } else {
    throw std::runtime_error("ablate: unknown variant flag '" + flag + "'");
  }
}

std::vector<AblationRow> ablate(const std::vector<Trial>& dataset, const SplitPlan& plan,
                                const std::vector<std::string>& variants, double label_fraction,
                                const ModelConfig& mcfg, const LossWeights& weights,
                                const TrainConfig& tcfg, long jobs) {
  std::vector<AblationRow> rows;
  for (const auto& flag : variants) {
    ModelConfig m = mcfg;
    LossWeights w = weights;
    apply_variant(flag, m, w);
    AblationRow row;
    row.variant = flag;
    row.report = run_cv(dataset, plan, label_fraction, m, w, tcfg, jobs);
    row.report.experiment = flag;
    row.report.ablation_flags = {flag};
    rows.push_back(std::move(row));
  }
  return rows;
}

void export_latents(const ParamStore<float>& params, const ModelConfig& mcfg,
                    const std::vector<const Trial*>& trials, ExportLayer layer, std::ostream& os) {
  long dim = layer == ExportLayer::final_fc ? mcfg.class_count : mcfg.concat_latent_width();
  os << "trial_id,subject_id,label";
  for (long j = 0; j < dim; ++j) os << ",v" << j;
  os << "\n";
  os.precision(9);

  const long chunk = 64;
  for (size_t off = 0; off < trials.size(); off += static_cast<size_t>(chunk)) {
    std::vector<const Trial*> part;
    for (size_t i = off; i < std::min(trials.size(), off + static_cast<size_t>(chunk)); ++i)
      part.push_back(trials[i]);
    Batch<float> b = make_batch<float>(part, mcfg, nullptr);
    Tape<float> tape;
    VarStore<float> vs = register_params(tape, params, false);
    ForwardResult<float> fr = forward(tape, vs, params, mcfg, b, RunMode::eval, nullptr, false);
    const auto& vecs =
        layer == ExportLayer::final_fc ? tape.val(fr.logits) : tape.val(fr.latent_concat);
    for (long i = 0; i < b.B; ++i) {
      const Trial* t = part[static_cast<size_t>(i)];
      os << t->trial_id << ',' << t->subject_id << ',' << t->label;
      for (long j = 0; j < dim; ++j) os << ',' << vecs.at(i, j);
      os << "\n";
    }
  }
}

namespace {

json tensor_to_json(const Tensor<double>& t) {
  json rows = json::array();
  for (long r = 0; r < t.shape[0]; ++r) {
    json row = json::array();
    for (long c = 0; c < t.shape[1]; ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor<double> tensor_from_json(const json& rows) {
  long R = static_cast<long>(rows.size());
  long C = R > 0 ? static_cast<long>(rows[0].size()) : 0;
  Tensor<double> t({R, C});
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) t.at(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
  return t;
}

}  // namespace

void save_eval_report(const EvalReport& report, const std::string& json_path) {
  json j;
  j["experiment"] = report.experiment;
  j["label_fraction"] = report.label_fraction;
  j["ablation_flags"] = report.ablation_flags;
  j["class_count"] = report.class_count;
  j["mean_accuracy"] = report.mean_accuracy;
  j["std_accuracy"] = report.std_accuracy;
  j["mean_f1"] = report.mean_f1;
  j["std_f1"] = report.std_f1;
  j["folds"] = json::array();
  for (const auto& f : report.folds) {
    json jf;
    jf["fold"] = f.fold;
    jf["train_subjects"] = f.train_subjects;
    jf["test_subjects"] = f.test_subjects;
    jf["n_train_labeled"] = f.n_train_labeled;
    jf["n_train_unlabeled"] = f.n_train_unlabeled;
    jf["n_test"] = f.n_test;
    jf["accuracy"] = f.accuracy;
    jf["macro_f1"] = f.macro_f1;
    jf["confusion_counts"] = tensor_to_json(f.confusion_counts);
    jf["confusion_normalized"] = tensor_to_json(f.confusion_normalized);
    j["folds"].push_back(std::move(jf));
  }
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw std::runtime_error("save_eval_report: cannot open '" + json_path + "'");
  out << j.dump(2) << "\n";
}

EvalReport load_eval_report(const std::string& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw std::runtime_error("load_eval_report: cannot open '" + json_path + "'");
  json j = json::parse(in);
  EvalReport report;
  report.experiment = j.at("experiment").get<std::string>();
  report.label_fraction = j.at("label_fraction").get<double>();
  report.ablation_flags = j.at("ablation_flags").get<std::vector<std::string>>();
  report.class_count = j.at("class_count").get<int>();
  report.mean_accuracy = j.at("mean_accuracy").get<double>();
  report.std_accuracy = j.at("std_accuracy").get<double>();
  report.mean_f1 = j.at("mean_f1").get<double>();
  report.std_f1 = j.at("std_f1").get<double>();
  for (const auto& jf : j.at("folds")) {
    FoldReport f;
    f.fold = jf.at("fold").get<long>();
    f.train_subjects = jf.at("train_subjects").get<std::vector<std::string>>();
    f.test_subjects = jf.at("test_subjects").get<std::vector<std::string>>();
    f.n_train_labeled = jf.at("n_train_labeled").get<long>();
    f.n_train_unlabeled = jf.at("n_train_unlabeled").get<long>();
    f.n_test = jf.at("n_test").get<long>();
    f.accuracy = jf.at("accuracy").get<double>();
    f.macro_f1 = jf.at("macro_f1").get<double>();
    f.confusion_counts = tensor_from_json(jf.at("confusion_counts"));
    f.confusion_normalized = tensor_from_json(jf.at("confusion_normalized"));
    report.folds.push_back(std::move(f));
  }
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& os) {
  os << "fold,test_subjects,n_train_labeled,n_train_unlabeled,n_test,accuracy,macro_f1\n";
  os.precision(9);
  for (const auto& f : report.folds) {
    os << f.fold << ',';
    for (size_t i = 0; i < f.test_subjects.size(); ++i)
      os << (i ? ";" : "") << f.test_subjects[i];
    os << ',' << f.n_train_labeled << ',' << f.n_train_unlabeled << ',' << f.n_test << ','
       << f.accuracy << ',' << f.macro_f1 << "\n";
  }
  os << "mean,,,,," << report.mean_accuracy << ',' << report.mean_f1 << "\n";
  os << "std,,,,," << report.std_accuracy << ',' << report.std_f1 << "\n";
}

void write_confusion_csv(const FoldReport& fold, std::ostream& os) {
  os.precision(9);
  const auto& m = fold.confusion_normalized;
  for (long r = 0; r < m.shape[0]; ++r) {
    for (long c = 0; c < m.shape[1]; ++c) os << (c ? "," : "") << m.at(r, c);
    os << "\n";
  }
}

// ---- raster output ---------------------------------------------------------

namespace {

struct Ppm {
  long w, h;
  std::vector<uint8_t> px;  // rgb
  Ppm(long w_, long h_) : w(w_), h(h_), px(static_cast<size_t>(w_ * h_ * 3), 255) {}
  void set(long x, long y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= w || y < 0 || y >= h) return;
    size_t o = static_cast<size_t>((y * w + x) * 3);
    px[o] = r;
    px[o + 1] = g;
    px[o + 2] = b;
  }
  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open '" + path + "'");
    f << "P6\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  }
};

void class_color(int k, uint8_t& r, uint8_t& g, uint8_t& b) {
  static const uint8_t palette[][3] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                       {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};
  const auto& c = palette[k % 6];
  r = c[0];
  g = c[1];
  b = c[2];
}

}  // namespace

void render_confusion_ppm(const Tensor<double>& normalized, const std::string& path) {
  long K = normalized.shape[0];
  const long cell = 48;
  Ppm img(K * cell, K * cell);
  for (long r = 0; r < K; ++r)
    for (long c = 0; c < K; ++c) {
      double v = std::clamp(normalized.at(r, c), 0.0, 1.0);
      // white -> blue ramp
      uint8_t red = static_cast<uint8_t>(255.0 * (1.0 - v));
      uint8_t green = static_cast<uint8_t>(255.0 * (1.0 - 0.7 * v));
      uint8_t blue = 255;
      for (long y = r * cell; y < (r + 1) * cell; ++y)
        for (long x = c * cell; x < (c + 1) * cell; ++x) {
          bool border = y % cell == 0 || x % cell == 0;
          if (border)
            img.set(x, y, 120, 120, 120);
          else
            img.set(x, y, red, green, blue);
        }
    }
  img.save(path);
}

void render_scatter_ppm(const std::vector<std::array<double, 2>>& points,
                        const std::vector<int>& labels, int class_count, const std::string& path) {
  (void)class_count;
  const long size = 480;
  Ppm img(size, size);
  double lo0 = 0, hi0 = 1, lo1 = 0, hi1 = 1;
  if (!points.empty()) {
    lo0 = hi0 = points[0][0];
    lo1 = hi1 = points[0][1];
    for (const auto& p : points) {
      lo0 = std::min(lo0, p[0]);
      hi0 = std::max(hi0, p[0]);
      lo1 = std::min(lo1, p[1]);
      hi1 = std::max(hi1, p[1]);
    }
  }
  double s0 = hi0 > lo0 ? hi0 - lo0 : 1.0;
  double s1 = hi1 > lo1 ? hi1 - lo1 : 1.0;
  for (size_t i = 0; i < points.size(); ++i) {
    long x = static_cast<long>((points[i][0] - lo0) / s0 * (size - 20)) + 10;
    long y = size - 10 - static_cast<long>((points[i][1] - lo1) / s1 * (size - 20));
    uint8_t r, g, b;
    class_color(i < labels.size() ? std::max(labels[i], 0) : 0, r, g, b);
    for (long dy = -2; dy <= 2; ++dy)
      for (long dx = -2; dx <= 2; ++dx)
        if (dx * dx + dy * dy <= 4) img.set(x + dx, y + dy, r, g, b);
  }
  img.save(path);
}

}  // namespace ssda
