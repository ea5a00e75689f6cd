#pragma once

#include <vector>

#include "ssda/model.hpp"
#include "ssda/tape.hpp"
#include "ssda/tensor.hpp"
#include "ssda/types.hpp"

namespace ssda {

// One training step's loss terms. Identities the tests pin down:
// supervised = ce + gamma*center; unsupervised = mse + ds;
// total = unsupervised + supervised + l2_penalty.
struct LossBreakdown {
  double ce = 0.0;
  double center = 0.0;
  double supervised = 0.0;
  double mse = 0.0;
  double ds = 0.0;
  double unsupervised = 0.0;
  double l2_penalty = 0.0;
  double total = 0.0;
  bool had_labeled = true;  // false when the batch had no labeled trials

  static const char* csv_header() { return "ce,center,supervised,mse,ds,unsupervised,l2,total"; }
};

// ---- plain-value loss terms (double precision reference path) -------------

// Mean negative log probability of the true class, probs clamped at 1e-12.
double cross_entropy(const Tensor<double>& probs, const std::vector<int>& labels);

// 0.5 * sum_i ||f_i - c_{y_i}||^2 over the labeled batch.
double center_loss(const Tensor<double>& features, const std::vector<int>& labels,
                   const Tensor<double>& centers);

// EMA pull of each present class center toward its batch feature mean:
// c_k <- c_k - alpha * (c_k - mean_k). Absent classes stay put.
template <typename T>
void update_centers(Tensor<T>& centers, const Tensor<T>& features, const std::vector<int>& labels,
                    double alpha) {
  check(alpha >= 0.0 && alpha <= 1.0, "update_centers: alpha must be in [0, 1]");
  if (alpha == 0.0) return;  // no-op
  check(features.ndim() == 2 && static_cast<long>(labels.size()) == features.shape[0],
        "update_centers: shape mismatch");
  long D = features.shape[1];
  std::vector<std::vector<double>> sums(static_cast<size_t>(centers.shape[0]));
  std::vector<long> counts(static_cast<size_t>(centers.shape[0]), 0);
  for (long i = 0; i < features.shape[0]; ++i) {
    int y = labels[static_cast<size_t>(i)];
    check(y >= 0 && y < centers.shape[0], "update_centers: label out of range");
    auto& sum = sums[static_cast<size_t>(y)];
    if (sum.empty()) sum.assign(static_cast<size_t>(D), 0.0);
    for (long j = 0; j < D; ++j) sum[static_cast<size_t>(j)] += static_cast<double>(features.at(i, j));
    ++counts[static_cast<size_t>(y)];
  }
  for (long y = 0; y < centers.shape[0]; ++y) {
    if (counts[static_cast<size_t>(y)] == 0) continue;
    for (long j = 0; j < D; ++j) {
      double mean = sums[static_cast<size_t>(y)][static_cast<size_t>(j)] /
                    static_cast<double>(counts[static_cast<size_t>(y)]);
      centers.at(y, j) =
          static_cast<T>(centers.at(y, j) - alpha * (static_cast<double>(centers.at(y, j)) - mean));
    }
  }
}

// sum_i beta_i * ||D - D_hat_i||^2, summed over every window/channel/sample
// (division-free).
double mse_recon(const Tensor<double>& windows, const std::vector<Tensor<double>>& recons,
                 const std::vector<double>& beta);

// Dimensional-scaling stress: sum_i eta_i * sum over ordered same-group
// pairs of (d_H - d_L)^2, with d_H over flattened raw trials and d_L over
// that column's latents. With normalize, each group's d_H and d_L are
// divided by their respective means over the summed pairs.
double ds_loss(const Tensor<double>& raw_flat, const std::vector<Tensor<double>>& latents,
               const std::vector<double>& eta, const std::vector<char>& is_labeled,
               bool normalize);

// ---- tape composition ------------------------------------------------------

template <typename T>
struct LossVars {
  VarId total = -1;
  VarId ce = -1, center = -1, mse = -1, ds = -1;
  LossBreakdown values;
};

namespace detail {

// Pairwise Euclidean distances between rows of a plain tensor.
template <typename T>
Tensor<T> pdist_values(const Tensor<T>& X, const std::vector<long>& rows) {
  long G = static_cast<long>(rows.size()), D = X.shape[1];
  Tensor<T> P({G, G});
  for (long a = 0; a < G; ++a)
    for (long b = a + 1; b < G; ++b) {
      T s = T(0);
      for (long j = 0; j < D; ++j) {
        T d = X.at(rows[(size_t)a], j) - X.at(rows[(size_t)b], j);
        s += d * d;
      }
      T dist = std::sqrt(s);
      P.at(a, b) = dist;
      P.at(b, a) = dist;
    }
  return P;
}

// Ordered in-group pairs (k != l); a positive budget samples that many.
inline std::vector<std::pair<long, long>> group_pairs(long G, long budget, Rng* rng) {
  std::vector<std::pair<long, long>> pairs;
  for (long a = 0; a < G; ++a)
    for (long b = 0; b < G; ++b)
      if (a != b) pairs.push_back({a, b});
  if (budget > 0 && budget < static_cast<long>(pairs.size()) && rng) {
    rng->shuffle(pairs);
    pairs.resize(static_cast<size_t>(budget));
  }
  return pairs;
}

// DS stress of one group of one column, on tape. raw-side quantities are
// constants; the latent side differentiates through pairdist and, when
// normalizing, through the mean distance.
template <typename T>
VarId ds_group_stress(Tape<T>& tape, VarId latent, const Tensor<T>& raw_flat,
                      const std::vector<long>& rows, bool normalize, long budget, Rng* rng) {
  long G = static_cast<long>(rows.size());
  if (G < 2) return -1;
  auto pairs = group_pairs(G, budget, rng);
  if (pairs.empty()) return -1;
  T npairs = static_cast<T>(pairs.size());

  Tensor<T> ph = pdist_values(raw_flat, rows);
  Tensor<T> mask({G, G});
  for (auto [a, b] : pairs) mask.at(a, b) = T(1);

  Tensor<T> href({G, G});
  if (normalize) {
    T mu_h = T(0);
    for (auto [a, b] : pairs) mu_h += ph.at(a, b);
    mu_h /= npairs;
    for (auto [a, b] : pairs) href.at(a, b) = ph.at(a, b) / (mu_h + static_cast<T>(1e-12));
  } else {
    for (auto [a, b] : pairs) href.at(a, b) = ph.at(a, b);
  }

  VarId sub_lat = tape.gather_rows(latent, rows);
  VarId pl = tape.pairdist(sub_lat);
  VarId maskv = tape.constant(mask);
  if (normalize) {
    VarId mu_l = tape.scale(tape.sum_all(tape.mul(pl, maskv)), 1.0 / static_cast<double>(npairs));
    pl = tape.div_scalar(pl, mu_l, 1e-12);
  }
  VarId resid = tape.sub(tape.constant(href), pl);
  return tape.sum_all(tape.mul(tape.mul(resid, resid), maskv));
}

}  // namespace detail

// Composes Eq.-style terms over a forward pass: CE and center loss over the
// labeled members, reconstruction and DS stress over everyone, plus the fc2
// L2 penalty already provided by the forward.
template <typename T>
LossVars<T> build_total_loss(Tape<T>& tape, const ForwardResult<T>& fr, const Batch<T>& batch,
                             const ModelConfig& cfg, const LossWeights& w, const TrainConfig& tc,
                             const Tensor<T>& centers, Rng* pair_rng = nullptr) {
  check(w.beta.size() == cfg.columns.size() && w.eta.size() == cfg.columns.size(),
        "build_total_loss: beta/eta must have one weight per column");
  LossVars<T> lv;

  std::vector<long> labeled_rows;
  std::vector<long> unlabeled_rows;
  std::vector<int> labeled_labels;
  for (long i = 0; i < batch.B; ++i) {
    if (batch.labels[(size_t)i] >= 0) {
      labeled_rows.push_back(i);
      labeled_labels.push_back(batch.labels[(size_t)i]);
    } else {
      unlabeled_rows.push_back(i);
    }
  }
  lv.values.had_labeled = !labeled_rows.empty();

  std::vector<VarId> parts;

  // Supervised terms over the labeled members only.
  if (!labeled_rows.empty()) {
    VarId probs_l = tape.gather_rows(fr.probs, labeled_rows);
    lv.ce = tape.ce_from_probs(probs_l, labeled_labels);
    parts.push_back(lv.ce);
    VarId feats_l = tape.gather_rows(fr.features, labeled_rows);
    lv.center = tape.center_penalty(feats_l, labeled_labels, centers);
    if (w.gamma != 0.0) parts.push_back(tape.scale(lv.center, w.gamma));
  }

  // Reconstruction error, division-free, weighted per column.
  VarId windows_c = -1;
  std::vector<VarId> mse_cols;
  for (const auto& colf : fr.columns) {
    double beta = w.beta[static_cast<size_t>(colf.column)];
    if (beta == 0.0) continue;
    check(colf.recon != -1, "build_total_loss: beta > 0 but the forward ran without the decoder");
    if (windows_c == -1) windows_c = tape.constant(batch.windows);
    VarId diff = tape.sub(colf.recon, windows_c);
    VarId sse = tape.sum_all(tape.mul(diff, diff));
    mse_cols.push_back(tape.scale(sse, beta));
  }
  if (!mse_cols.empty()) {
    lv.mse = mse_cols[0];
    for (size_t i = 1; i < mse_cols.size(); ++i) lv.mse = tape.add(lv.mse, mse_cols[i]);
    parts.push_back(lv.mse);
  }

  // Dimensional-scaling stress within the labeled and unlabeled groups.
  std::vector<VarId> ds_cols;
  for (const auto& colf : fr.columns) {
    double eta = w.eta[static_cast<size_t>(colf.column)];
    if (eta == 0.0) continue;
    std::vector<VarId> groups;
    for (const auto& rows : {labeled_rows, unlabeled_rows}) {
      VarId g = detail::ds_group_stress(tape, colf.latent, batch.raw_flat, rows,
                                        tc.ds_normalize, tc.ds_pair_budget, pair_rng);
      if (g != -1) groups.push_back(g);
    }
    if (groups.empty()) continue;
    VarId col_sum = groups[0];
    for (size_t i = 1; i < groups.size(); ++i) col_sum = tape.add(col_sum, groups[i]);
    ds_cols.push_back(tape.scale(col_sum, eta));
  }
  if (!ds_cols.empty()) {
    lv.ds = ds_cols[0];
    for (size_t i = 1; i < ds_cols.size(); ++i) lv.ds = tape.add(lv.ds, ds_cols[i]);
    parts.push_back(lv.ds);
  }

  parts.push_back(fr.l2_penalty);

  lv.total = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) lv.total = tape.add(lv.total, parts[i]);

  lv.values.ce = lv.ce == -1 ? 0.0 : static_cast<double>(tape.val(lv.ce)[0]);
  lv.values.center = lv.center == -1 ? 0.0 : static_cast<double>(tape.val(lv.center)[0]);
  lv.values.supervised = lv.values.ce + w.gamma * lv.values.center;
  lv.values.mse = lv.mse == -1 ? 0.0 : static_cast<double>(tape.val(lv.mse)[0]);
  lv.values.ds = lv.ds == -1 ? 0.0 : static_cast<double>(tape.val(lv.ds)[0]);
  lv.values.unsupervised = lv.values.mse + lv.values.ds;
  lv.values.l2_penalty = static_cast<double>(tape.val(fr.l2_penalty)[0]);
  lv.values.total = static_cast<double>(tape.val(lv.total)[0]);
  return lv;
}

}  // namespace ssda
