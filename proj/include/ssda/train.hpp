#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssda/adam.hpp"
#include "ssda/losses.hpp"
#include "ssda/model.hpp"
#include "ssda/types.hpp"

namespace ssda {

struct EpochStats {
  LossBreakdown mean_loss;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  long best_epoch = -1;  // earliest epoch with the maximum validation accuracy
  double best_val_accuracy = 0.0;
};

template <typename T>
struct TrainResult {
  ParamStore<T> best_params;
  ParamStore<T> final_params;
  TrainHistory history;
};

namespace detail {

// Stratified validation indices drawn from the labeled trials only.
inline std::vector<size_t> pick_validation(const std::vector<const Trial*>& trials,
                                           const LabelMask& mask, double val_fraction, Rng& rng) {
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < trials.size(); ++i) {
    const Trial* t = trials[i];
    if (t->has_label() && mask.is_labeled(t->trial_id)) by_class[t->label].push_back(i);
  }
  std::vector<size_t> val;
  for (auto& [cls, idx] : by_class) {
    (void)cls;
    rng.shuffle(idx);
    size_t take = static_cast<size_t>(std::floor(val_fraction * static_cast<double>(idx.size())));
    for (size_t i = 0; i < take; ++i) val.push_back(idx[i]);
  }
  if (val.empty() && !by_class.empty()) {
    // Keep model selection possible on tiny labeled sets.
    size_t best_cls_size = 0;
    int best_cls = -1;
    for (const auto& [cls, idx] : by_class)
      if (idx.size() > best_cls_size) {
        best_cls_size = idx.size();
        best_cls = cls;
      }
    if (best_cls_size >= 2) val.push_back(by_class[best_cls][0]);
  }
  std::sort(val.begin(), val.end());
  return val;
}

// Splits one shuffled epoch order into batches. Every index appears exactly
// once; the trailing partial batch is kept. With min_labeled > 0 the labeled
// indices are dealt round-robin first so center loss sees every batch.
inline std::vector<std::vector<size_t>> plan_epoch_batches(
    const std::vector<size_t>& order, long batch_size, long min_labeled,
    const std::function<bool(size_t)>& is_labeled) {
  long bs = std::max<long>(1, batch_size);
  long nbatches = (static_cast<long>(order.size()) + bs - 1) / bs;
  std::vector<std::vector<size_t>> batches;
  if (nbatches == 0) return batches;
  if (min_labeled > 0) {
    std::vector<size_t> lab, unlab;
    for (size_t i : order) (is_labeled(i) ? lab : unlab).push_back(i);
    batches.assign(static_cast<size_t>(nbatches), {});
    size_t bi = 0;
    for (size_t i : lab) {
      batches[bi].push_back(i);
      bi = (bi + 1) % batches.size();
    }
    for (size_t i : unlab) {
      size_t arg = 0;
      for (size_t k = 1; k < batches.size(); ++k)
        if (batches[k].size() < batches[arg].size()) arg = k;
      batches[arg].push_back(i);
    }
  } else {
    for (long k = 0; k < nbatches; ++k)
      batches.emplace_back(order.begin() + k * bs,
                           order.begin() +
                               std::min<long>((k + 1) * bs, static_cast<long>(order.size())));
  }
  return batches;
}

}  // namespace detail

// End-to-end semi-supervised optimization: shuffled mixed batches, the
// composite loss over every member (supervised terms over labeled members),
// one Adam update per batch, centers and BN running stats refreshed after
// each step, best epoch chosen by labeled-validation accuracy.
template <typename T>
TrainResult<T> train(const std::vector<const Trial*>& trials, const LabelMask& mask,
                     const ModelConfig& cfg, const LossWeights& weights, const TrainConfig& tc,
                     std::ostream* log_csv = nullptr) {
  check(!trials.empty(), "train: empty dataset");
  long labeled_count = 0;
  for (const Trial* t : trials)
    if (t->has_label() && mask.is_labeled(t->trial_id)) ++labeled_count;
  check(labeled_count > 0, "train: no labeled trials, validation impossible");

  Rng rng_split = Rng(tc.seed).fork(1);
  Rng rng_shuffle = Rng(tc.seed).fork(2);
  Rng rng_dropout = Rng(tc.seed).fork(3);
  Rng rng_pairs = Rng(tc.seed).fork(4);

  std::vector<size_t> val_idx = detail::pick_validation(trials, mask, tc.val_fraction, rng_split);
  std::vector<char> in_val(trials.size(), 0);
  for (size_t i : val_idx) in_val[i] = 1;
  std::vector<const Trial*> val_trials;
  for (size_t i : val_idx) val_trials.push_back(trials[i]);
  std::vector<size_t> fit_idx;
  for (size_t i = 0; i < trials.size(); ++i)
    if (!in_val[i]) fit_idx.push_back(i);
  check(!fit_idx.empty(), "train: validation split consumed every trial");

  bool need_decoder = false;
  for (double b : weights.beta) need_decoder = need_decoder || b != 0.0;

  ParamStore<T> ps = init_params<T>(cfg, tc.seed);
  Adam<T> adam(tc.learning_rate);
  TrainResult<T> out;
  out.best_params = ps;

  if (log_csv) (*log_csv) << "epoch," << LossBreakdown::csv_header() << ",val_accuracy,seconds\n";

  for (long epoch = 0; epoch < tc.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<size_t> order = fit_idx;
    rng_shuffle.shuffle(order);

    auto batches = detail::plan_epoch_batches(
        order, tc.batch_size, tc.min_labeled_per_batch, [&](size_t i) {
          const Trial* t = trials[i];
          return t->has_label() && mask.is_labeled(t->trial_id);
        });

    LossBreakdown acc;
    long nb = 0;
    for (const auto& bidx : batches) {
      if (bidx.empty()) continue;
      std::vector<const Trial*> bt;
      for (size_t i : bidx) bt.push_back(trials[i]);
      Batch<T> batch = make_batch<T>(bt, cfg, &mask);

      Tape<T> tape;
      VarStore<T> vs = register_params(tape, ps, true);
      ForwardResult<T> fr =
          forward(tape, vs, ps, cfg, batch, RunMode::train, &rng_dropout, need_decoder);
      LossVars<T> lv = build_total_loss(tape, fr, batch, cfg, weights, tc,
                                        ps.value("clf.centers"), &rng_pairs);
      tape.backward(lv.total);

      std::map<std::string, Tensor<T>> grads;
      for (const auto& name : ps.names())
        if (ps.trainable(name)) grads[name] = tape.grad(vs.at(name));
      adam.step(ps, grads);
      update_bn_running_stats(ps, fr);

      // Center EMA toward the labeled batch feature means.
      std::vector<long> lrows;
      std::vector<int> llabels;
      for (long i = 0; i < batch.B; ++i)
        if (batch.labels[static_cast<size_t>(i)] >= 0) {
          lrows.push_back(i);
          llabels.push_back(batch.labels[static_cast<size_t>(i)]);
        }
      if (!lrows.empty() && tc.center_alpha > 0.0) {
        const auto& feats = tape.val(fr.features);
        Tensor<T> lf({static_cast<long>(lrows.size()), feats.shape[1]});
        for (size_t r = 0; r < lrows.size(); ++r)
          for (long j = 0; j < feats.shape[1]; ++j)
            lf.at(static_cast<long>(r), j) = feats.at(lrows[r], j);
        update_centers(ps.value("clf.centers"), lf, llabels, tc.center_alpha);
      }

      acc.ce += lv.values.ce;
      acc.center += lv.values.center;
      acc.supervised += lv.values.supervised;
      acc.mse += lv.values.mse;
      acc.ds += lv.values.ds;
      acc.unsupervised += lv.values.unsupervised;
      acc.l2_penalty += lv.values.l2_penalty;
      acc.total += lv.values.total;
      ++nb;
    }
    if (nb > 0) {
      double inv = 1.0 / static_cast<double>(nb);
      acc.ce *= inv;
      acc.center *= inv;
      acc.supervised *= inv;
      acc.mse *= inv;
      acc.ds *= inv;
      acc.unsupervised *= inv;
      acc.l2_penalty *= inv;
      acc.total *= inv;
    }

    // Validation accuracy in eval mode (labeled validation trials only).
    double val_acc = 0.0;
    if (!val_trials.empty()) {
      std::vector<int> preds = predict(ps, cfg, val_trials);
      long correct = 0;
      for (size_t i = 0; i < val_trials.size(); ++i)
        if (preds[i] == val_trials[i]->label) ++correct;
      val_acc = static_cast<double>(correct) / static_cast<double>(val_trials.size());
    }

    EpochStats st;
    st.mean_loss = acc;
    st.val_accuracy = val_acc;
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.history.epochs.push_back(st);

    if (out.history.best_epoch < 0 || val_acc > out.history.best_val_accuracy) {
      out.history.best_epoch = epoch;
      out.history.best_val_accuracy = val_acc;
      out.best_params = ps;
    }

    if (log_csv) {
      std::ostringstream row;
      row.precision(10);
      row << epoch << ',' << acc.ce << ',' << acc.center << ',' << acc.supervised << ',' << acc.mse
          << ',' << acc.ds << ',' << acc.unsupervised << ',' << acc.l2_penalty << ',' << acc.total
          << ',' << val_acc << ',' << st.seconds << "\n";
      (*log_csv) << row.str();
    }
  }
  out.final_params = ps;
  return out;
}

// ============================================================================
// Gradient check harness
// ============================================================================

struct GradCheckEntry {
  std::string param;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // one per parameter tensor
  double max_rel_err = 0.0;
  bool passed(double tol) const { return max_rel_err < tol; }
};

// Miniature architecture for finite-difference verification: two small
// columns, dropout zeroed, n = 3 windows. Runs in float64.
inline ModelConfig miniature_config() {
  ModelConfig m;
  m.channels = 4;
  m.window_len = 20;
  m.step = 4;  // with T = 28 -> n = 3
  m.upsample_rows = 2;
  m.class_count = 2;
  m.fc_hidden = 8;
  m.l2_factor = 0.0005;
  m.columns = {
      {3, 5, 4, 0.0, 6, 0.0, 8, 0.0, 2, 4, 2},
      {2, 7, 3, 0.0, 5, 0.0, 6, 0.0, 2, 3, 2},
  };
  return m;
}

inline long miniature_trial_len(const ModelConfig& m) { return m.window_len + 2 * m.step; }

// Central-difference check of d(selected loss)/d(theta) for every trainable
// tensor, on a small random batch. `selector` is one of ce, center, mse, ds,
// total. Relative error is measured per parameter group against the group's
// gradient scale.
inline GradCheckReport grad_check(const ModelConfig& cfg, const LossWeights& weights,
                                  const TrainConfig& tc, const std::string& selector, double eps,
                                  uint64_t seed) {
  if (eps <= 0.0) throw std::runtime_error("grad_check: degenerate step (eps must be > 0)");
  for (const auto& c : cfg.columns)
    if (c.dropout != 0.0 || c.enc_lstm_dropout != 0.0 || c.dec_lstm_dropout != 0.0)
      throw std::runtime_error("grad_check: config must have all dropout rates at 0");

  Rng rng = Rng(seed).fork(0x67636b);
  long T = miniature_trial_len(cfg);
  long B = 4;
  std::vector<Trial> trials(static_cast<size_t>(B));
  for (long i = 0; i < B; ++i) {
    Trial& t = trials[static_cast<size_t>(i)];
    t.subject_id = "g";
    t.trial_id = "g/0/" + std::to_string(i);
    t.channels = cfg.channels;
    t.samples = T;
    t.class_count = cfg.class_count;
    t.label = i < 3 ? static_cast<int>(i % cfg.class_count) : -1;  // one unlabeled member
    t.data.resize(static_cast<size_t>(cfg.channels * T));
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  }
  std::vector<const Trial*> tptr;
  for (const auto& t : trials) tptr.push_back(&t);
  LabelMask mask;
  for (const auto& t : trials)
    (t.has_label() ? mask.labeled_ids : mask.unlabeled_ids).insert(t.trial_id);

  ParamStore<double> ps = init_params<double>(cfg, seed);
  // Non-trivial centers so the center-loss gradient is informative.
  auto& centers = ps.value("clf.centers");
  for (long i = 0; i < centers.numel(); ++i) centers[i] = rng.uniform(-0.5, 0.5);

  Batch<double> batch = make_batch<double>(tptr, cfg, &mask);

  auto eval_loss = [&](bool with_grad, std::map<std::string, Tensor<double>>* grads) {
    Tape<double> tape;
    VarStore<double> vs = register_params(tape, ps, with_grad);
    ForwardResult<double> fr = forward(tape, vs, ps, cfg, batch, RunMode::train, nullptr, true);
    LossVars<double> lv =
        build_total_loss(tape, fr, batch, cfg, weights, tc, ps.value("clf.centers"), nullptr);
    VarId root;
    if (selector == "ce")
      root = lv.ce;
    else if (selector == "center")
      root = lv.center;
    else if (selector == "mse")
      root = lv.mse;
    else if (selector == "ds")
      root = lv.ds;
    else if (selector == "total")
      root = lv.total;
    else
      throw std::runtime_error("grad_check: unknown loss selector '" + selector + "'");
    check(root != -1, "grad_check: selected loss term is absent for this config");
    double value = tape.val(root)[0];
    if (with_grad) {
      tape.backward(root);
      for (const auto& name : ps.names())
        if (ps.trainable(name)) (*grads)[name] = tape.grad(vs.at(name));
    }
    return value;
  };

  std::map<std::string, Tensor<double>> analytic;
  double f0 = eval_loss(true, &analytic);

  // Central differences of a loss of magnitude |f| carry rounding noise of
  // roughly |f|*eps_machine/(2*eps); gradients below that floor (digit-dead
  // parameters such as the attention bias, which softmax shift-invariance
  // makes exactly inert) are indistinguishable from zero either way.
  double noise_floor = 256.0 * std::abs(f0) * 2.220446e-16 / (2.0 * eps) + 1e-12;

  GradCheckReport report;
  for (const auto& name : ps.names()) {
    if (!ps.trainable(name)) continue;
    auto& p = ps.value(name);
    const auto& ga = analytic.at(name);
    double scale = 0.0;
    double max_diff = 0.0;
    Tensor<double> fd(p.shape);
    for (long i = 0; i < p.numel(); ++i) {
      double orig = p[i];
      p[i] = orig + eps;
      double fp = eval_loss(false, nullptr);
      p[i] = orig - eps;
      double fm = eval_loss(false, nullptr);
      p[i] = orig;
      fd[i] = (fp - fm) / (2.0 * eps);
    }
    for (long i = 0; i < p.numel(); ++i) {
      scale = std::max({scale, std::abs(ga[i]), std::abs(fd[i])});
      max_diff = std::max(max_diff, std::abs(ga[i] - fd[i]));
    }
    GradCheckEntry e;
    e.param = name;
    e.rel_err = scale < noise_floor ? 0.0 : max_diff / scale;
    report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    report.entries.push_back(std::move(e));
  }
  return report;
}

// ============================================================================
// Grid search over the loss weights
// ============================================================================

struct GridPoint {
  LossWeights weights;
  double val_accuracy = 0.0;
  double total_weight = 0.0;
};

struct GridResult {
  std::vector<GridPoint> table;
  size_t best_index = 0;
  const LossWeights& best() const { return table[best_index].weights; }
};

// Grid combinations in lexicographic order. By default beta and eta are
// shared scalars across columns (grid^3 points); the full factorial walks
// per-column weights. A positive cap bounds the combination count.
inline std::vector<LossWeights> grid_combos(const TrainConfig& tc, long M) {
  std::vector<double> values;
  for (double v = tc.grid_min; v <= tc.grid_max + 1e-9; v += tc.grid_step)
    values.push_back(std::round(v * 1e9) / 1e9);
  check(!values.empty(), "grid_search: empty grid range");

  std::vector<LossWeights> combos;
  if (!tc.grid_full_factorial) {
    for (double b : values)
      for (double e : values)
        for (double g : values) {
          LossWeights w;
          w.beta.assign(static_cast<size_t>(M), b);
          w.eta.assign(static_cast<size_t>(M), e);
          w.gamma = g;
          combos.push_back(std::move(w));
        }
  } else {
    // Odometer over (beta_1..beta_M, eta_1..eta_M, gamma).
    long dims = 2 * M + 1;
    std::vector<size_t> idx(static_cast<size_t>(dims), 0);
    while (true) {
      LossWeights w;
      for (long i = 0; i < M; ++i) w.beta.push_back(values[idx[static_cast<size_t>(i)]]);
      for (long i = 0; i < M; ++i) w.eta.push_back(values[idx[static_cast<size_t>(M + i)]]);
      w.gamma = values[idx[static_cast<size_t>(2 * M)]];
      combos.push_back(std::move(w));
      if (tc.grid_cap > 0 && static_cast<long>(combos.size()) >= tc.grid_cap) break;
      long d = dims - 1;
      while (d >= 0) {
        if (++idx[static_cast<size_t>(d)] < values.size()) break;
        idx[static_cast<size_t>(d)] = 0;
        --d;
      }
      if (d < 0) break;
    }
  }
  if (tc.grid_cap > 0 && static_cast<long>(combos.size()) > tc.grid_cap)
    combos.resize(static_cast<size_t>(tc.grid_cap));
  return combos;
}

// Exhaustive search over the (beta, eta, gamma) grid by validation accuracy;
// ties break toward the smallest total weight, then lexicographic order.
template <typename T>
GridResult grid_search(const std::vector<const Trial*>& trials, const LabelMask& mask,
                       const ModelConfig& cfg, const TrainConfig& tc) {
  std::vector<LossWeights> combos = grid_combos(tc, cfg.column_count());

  GridResult out;
  for (const auto& w : combos) {
    TrainResult<T> tr = train<T>(trials, mask, cfg, w, tc);
    GridPoint p;
    p.weights = w;
    p.val_accuracy = tr.history.best_val_accuracy;
    for (double b : w.beta) p.total_weight += b;
    for (double e : w.eta) p.total_weight += e;
    p.total_weight += w.gamma;
    out.table.push_back(std::move(p));
  }

  auto lex_less = [](const LossWeights& a, const LossWeights& b) {
    if (a.beta != b.beta) return a.beta < b.beta;
    if (a.eta != b.eta) return a.eta < b.eta;
    return a.gamma < b.gamma;
  };
  for (size_t i = 1; i < out.table.size(); ++i) {
    const auto& cand = out.table[i];
    const auto& best = out.table[out.best_index];
    if (cand.val_accuracy > best.val_accuracy ||
        (cand.val_accuracy == best.val_accuracy &&
         (cand.total_weight < best.total_weight ||
          (cand.total_weight == best.total_weight && lex_less(cand.weights, best.weights)))))
      out.best_index = i;
  }
  return out;
}

}  // namespace ssda
