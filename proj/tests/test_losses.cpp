#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "ssda/losses.hpp"
#include "ssda/model.hpp"
#include "ssda/train.hpp"

using namespace ssda;
using namespace ssda::testutil;

namespace {

std::vector<Trial> random_trials(const ModelConfig& cfg, long B, uint64_t seed, long labeled) {
  Rng rng(seed);
  long T = miniature_trial_len(cfg);
  std::vector<Trial> trials(static_cast<size_t>(B));
  for (long i = 0; i < B; ++i) {
    Trial& t = trials[static_cast<size_t>(i)];
    t.subject_id = "s";
    t.trial_id = "s/0/" + std::to_string(i);
    t.channels = cfg.channels;
    t.samples = T;
    t.class_count = cfg.class_count;
    t.label = i < labeled ? static_cast<int>(i % cfg.class_count) : -1;
    t.data.resize(static_cast<size_t>(cfg.channels * T));
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  }
  return trials;
}

std::vector<const Trial*> ptrs(const std::vector<Trial>& ts) {
  std::vector<const Trial*> p;
  for (const auto& t : ts) p.push_back(&t);
  return p;
}

}  // namespace

TEST_CASE("cross entropy closed forms") {
  Tensor<double> uniform2({3, 2}, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  CHECK(cross_entropy(uniform2, {0, 1, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor<double> uniform4({2, 4}, {0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25});
  CHECK(cross_entropy(uniform4, {3, 1}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor<double> perfect({2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK(cross_entropy(perfect, {0, 1}) == 0.0);

  // Clamp keeps zero-probability targets finite.
  Tensor<double> zeroed({1, 2}, {0.0, 1.0});
  CHECK(cross_entropy(zeroed, {0}) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("center loss fixtures") {
  Tensor<double> centers({2, 2}, {0.0, 0.0, 3.0, 4.0});

  Tensor<double> at_center({2, 2}, {0.0, 0.0, 3.0, 4.0});
  CHECK(center_loss(at_center, {0, 1}, centers) == 0.0);

  Tensor<double> two({2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK(center_loss(two, {0, 0}, centers) == doctest::Approx(1.0));

  Tensor<double> one({1, 2}, {2.0, 0.0});
  CHECK(center_loss(one, {0}, centers) == doctest::Approx(2.0));  // 0.5 * 4

  CHECK_THROWS(center_loss(one, {5}, centers));
}

TEST_CASE("update_centers fixtures") {
  Tensor<double> feats({2, 2}, {2.0, 0.0, 2.0, 0.0});

  Tensor<double> c({2, 2}, {0.0, 0.0, 7.0, 7.0});
  update_centers(c, feats, {0, 0}, 1.0);
  CHECK(c.at(0, 0) == 2.0);  // jumped to the batch mean
  CHECK(c.at(0, 1) == 0.0);
  CHECK(c.at(1, 0) == 7.0);  // absent class untouched
  CHECK(c.at(1, 1) == 7.0);

  Tensor<double> c2({2, 2}, {0.0, 0.0, 7.0, 7.0});
  update_centers(c2, feats, {0, 0}, 0.0);
  CHECK(c2.at(0, 0) == 0.0);  // alpha 0 is a no-op

  Tensor<double> c3({1, 2}, {0.0, 0.0});
  update_centers(c3, Tensor<double>({1, 2}, {2.0, 0.0}), {0}, 0.5);
  CHECK(c3.at(0, 0) == 1.0);
  CHECK(c3.at(0, 1) == 0.0);
}

TEST_CASE("mse_recon fixtures") {
  Tensor<double> windows({1, 1, 2}, {1.0, -1.0});
  Tensor<double> same = windows;
  CHECK(mse_recon(windows, {same}, {1.0}) == 0.0);

  Tensor<double> off({1, 1, 2}, {2.0, -2.0});  // residual (-1, +1)
  CHECK(mse_recon(windows, {off}, {1.0}) == doctest::Approx(2.0));
  CHECK(mse_recon(windows, {off}, {0.0}) == 0.0);
  CHECK(mse_recon(windows, {off, same}, {0.5, 3.0}) == doctest::Approx(1.0));
}

TEST_CASE("ds_loss fixtures") {
  // Two labeled trials: raw distance 2, latent distance 1, normalization off
  // -> ordered pairs (1,2) and (2,1) contribute (2-1)^2 each.
  Tensor<double> raw({2, 2}, {0.0, 0.0, 2.0, 0.0});
  Tensor<double> lat({2, 1}, {0.0, 1.0});
  std::vector<char> labeled = {1, 1};
  CHECK(ds_loss(raw, {lat}, {1.0}, labeled, false) == doctest::Approx(2.0));

  // Latents reproducing the raw distances exactly -> 0.
  Tensor<double> lat_same({2, 1}, {0.0, 2.0});
  CHECK(ds_loss(raw, {lat_same}, {1.0}, labeled, false) == doctest::Approx(0.0));

  // A single trial per group has no pairs.
  std::vector<char> split_groups = {1, 0};
  CHECK(ds_loss(raw, {lat}, {1.0}, split_groups, false) == 0.0);

  // eta = 0 silences the column.
  CHECK(ds_loss(raw, {lat}, {0.0}, labeled, false) == 0.0);

  // Normalized stress is scale-invariant in the latents.
  Tensor<double> lat_scaled({2, 1}, {0.0, 17.0});
  CHECK(ds_loss(raw, {lat_scaled}, {1.0}, labeled, true) ==
        doctest::Approx(ds_loss(raw, {lat}, {1.0}, labeled, true)).epsilon(1e-9));
}

TEST_CASE("ds_loss is invariant to relabeling trials within a group") {
  Rng rng(55);
  long B = 6, D = 8, L = 3;
  Tensor<double> raw({B, D});
  Tensor<double> lat({B, L});
  for (long i = 0; i < raw.numel(); ++i) raw[i] = rng.uniform(-2, 2);
  for (long i = 0; i < lat.numel(); ++i) lat[i] = rng.uniform(-2, 2);
  std::vector<char> labeled = {1, 1, 1, 0, 0, 0};
  double base = ds_loss(raw, {lat}, {0.7}, labeled, true);

  // Swap trials 0 and 2 (both labeled) and trials 3 and 5 (both unlabeled).
  auto swap_rows = [](Tensor<double>& t, long a, long b) {
    for (long j = 0; j < t.shape[1]; ++j) std::swap(t.at(a, j), t.at(b, j));
  };
  swap_rows(raw, 0, 2);
  swap_rows(lat, 0, 2);
  swap_rows(raw, 3, 5);
  swap_rows(lat, 3, 5);
  CHECK(ds_loss(raw, {lat}, {0.7}, labeled, true) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("loss terms stay non-negative on random inputs") {
  Rng rng(77);
  for (int it = 0; it < 50; ++it) {
    long B = 2 + rng.below(5), K = 2 + rng.below(3), D = 1 + rng.below(6);
    Tensor<double> logits({B, K});
    for (long i = 0; i < logits.numel(); ++i) logits[i] = rng.uniform(-4, 4);
    Tape<double> t;
    auto probs = t.softmax_rows(t.constant(logits));
    std::vector<int> labels;
    for (long i = 0; i < B; ++i) labels.push_back(static_cast<int>(rng.below(K)));
    CHECK(cross_entropy(t.val(probs), labels) >= 0.0);

    Tensor<double> feats({B, D}), centers({K, D});
    for (long i = 0; i < feats.numel(); ++i) feats[i] = rng.uniform(-3, 3);
    for (long i = 0; i < centers.numel(); ++i) centers[i] = rng.uniform(-3, 3);
    CHECK(center_loss(feats, labels, centers) >= 0.0);

    Tensor<double> w({B, 1, D}), r({B, 1, D});
    for (long i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-3, 3);
    for (long i = 0; i < r.numel(); ++i) r[i] = rng.uniform(-3, 3);
    CHECK(mse_recon(w, {r}, {rng.uniform(0, 1)}) >= 0.0);

    Tensor<double> raw({B, D}), lat({B, D});
    for (long i = 0; i < raw.numel(); ++i) raw[i] = rng.uniform(-3, 3);
    for (long i = 0; i < lat.numel(); ++i) lat[i] = rng.uniform(-3, 3);
    std::vector<char> lab;
    for (long i = 0; i < B; ++i) lab.push_back(static_cast<char>(rng.below(2)));
    CHECK(ds_loss(raw, {lat}, {rng.uniform(0, 1)}, lab, true) >= 0.0);
  }
}

TEST_CASE("loss term gradients w.r.t. tensor inputs match finite differences") {
  Rng rng(88);
  double worst_ce = 0, worst_center = 0, worst_mse = 0, worst_ds = 0;
  for (int it = 0; it < 20; ++it) {
    long B = 3 + rng.below(3), K = 2 + rng.below(3), D = 2 + rng.below(4);

    auto logits = random_tensor({B, K}, rng, -2, 2);
    std::vector<int> labels;
    for (long i = 0; i < B; ++i) labels.push_back(static_cast<int>(rng.below(K)));
    worst_ce = std::max(
        worst_ce, fd_max_rel_err({logits}, [&](DTape& t, const std::vector<VarId>& in) {
          return t.ce_from_probs(t.softmax_rows(in[0]), labels);
        }));

    auto feats = random_tensor({B, D}, rng, -2, 2);
    auto centers = random_tensor({K, D}, rng, -2, 2);
    worst_center = std::max(
        worst_center, fd_max_rel_err({feats}, [&](DTape& t, const std::vector<VarId>& in) {
          return t.center_penalty(in[0], labels, centers);
        }));

    auto windows = random_tensor({B, 1, D}, rng, -2, 2);
    auto recon = random_tensor({B, 1, D}, rng, -2, 2);
    worst_mse = std::max(
        worst_mse, fd_max_rel_err({recon}, [&](DTape& t, const std::vector<VarId>& in) {
          VarId diff = t.sub(in[0], t.constant(windows));
          return t.scale(t.sum_all(t.mul(diff, diff)), 0.7);
        }));

    auto raw = random_tensor({B, 2 * D}, rng, -2, 2);
    auto lat = random_tensor({B, D}, rng, -2, 2);
    std::vector<long> rows;
    for (long i = 0; i < B; ++i) rows.push_back(i);
    bool norm = it % 2 == 0;
    worst_ds = std::max(
        worst_ds, fd_max_rel_err({lat}, [&](DTape& t, const std::vector<VarId>& in) {
          return detail::ds_group_stress(t, in[0], raw, rows, norm, 0, nullptr);
        }));
  }
  CHECK(worst_ce < 1e-4);
  CHECK(worst_center < 1e-4);
  CHECK(worst_mse < 1e-4);
  CHECK(worst_ds < 1e-4);
}

TEST_CASE("total loss identities hold over random batches") {
  ModelConfig cfg = miniature_config();
  LossWeights w;
  w.beta = {0.2, 0.1};
  w.eta = {0.1, 0.1};
  w.gamma = 0.3;
  TrainConfig tc;
  tc.ds_normalize = true;

  Rng seeds(123);
  for (int it = 0; it < 100; ++it) {
    long B = 2 + seeds.below(4);
    long labeled = seeds.below(B + 1);
    auto trials = random_trials(cfg, B, 1000 + it, labeled);
    auto batch = make_batch<double>(ptrs(trials), cfg, nullptr);
    ParamStore<double> ps = init_params<double>(cfg, 5 + it);
    auto& centers = ps.value("clf.centers");
    for (long i = 0; i < centers.numel(); ++i) centers[i] = seeds.uniform(-1, 1);

    Tape<double> tape;
    auto vs = register_params(tape, ps, false);
    auto fr = forward(tape, vs, ps, cfg, batch, RunMode::eval);
    auto lv = build_total_loss(tape, fr, batch, cfg, w, tc, centers);
    const auto& v = lv.values;

    CHECK(v.supervised == doctest::Approx(v.ce + w.gamma * v.center).epsilon(1e-9));
    CHECK(v.unsupervised == doctest::Approx(v.mse + v.ds).epsilon(1e-9));
    CHECK(std::abs(v.total - (v.unsupervised + v.supervised + v.l2_penalty)) < 1e-9);
    CHECK(v.ce >= 0.0);
    CHECK(v.center >= 0.0);
    CHECK(v.mse >= 0.0);
    CHECK(v.ds >= 0.0);
    CHECK(v.l2_penalty >= 0.0);
    CHECK((labeled > 0) == v.had_labeled);

    // Dual route: the tape's scalars equal the plain-value implementations
    // applied to the tape's own tensors.
    std::vector<long> lrows;
    std::vector<int> llabels;
    for (long i = 0; i < batch.B; ++i)
      if (batch.labels[(size_t)i] >= 0) {
        lrows.push_back(i);
        llabels.push_back(batch.labels[(size_t)i]);
      }
    if (!lrows.empty()) {
      const auto& probs = tape.val(fr.probs);
      Tensor<double> probs_l({(long)lrows.size(), probs.shape[1]});
      const auto& feats = tape.val(fr.features);
      Tensor<double> feats_l({(long)lrows.size(), feats.shape[1]});
      for (size_t r = 0; r < lrows.size(); ++r) {
        for (long k = 0; k < probs.shape[1]; ++k) probs_l.at((long)r, k) = probs.at(lrows[r], k);
        for (long k = 0; k < feats.shape[1]; ++k) feats_l.at((long)r, k) = feats.at(lrows[r], k);
      }
      CHECK(v.ce == doctest::Approx(cross_entropy(probs_l, llabels)).epsilon(1e-9));
      CHECK(v.center == doctest::Approx(center_loss(feats_l, llabels, centers)).epsilon(1e-9));
    }

    std::vector<Tensor<double>> recons, latents;
    for (const auto& col : fr.columns) {
      recons.push_back(tape.val(col.recon));
      latents.push_back(tape.val(col.latent));
    }
    CHECK(v.mse == doctest::Approx(mse_recon(batch.windows, recons, w.beta)).epsilon(1e-9));
    std::vector<char> lab_mask;
    for (long i = 0; i < batch.B; ++i) lab_mask.push_back(batch.labels[(size_t)i] >= 0 ? 1 : 0);
    CHECK(v.ds ==
          doctest::Approx(ds_loss(batch.raw_flat, latents, w.eta, lab_mask, tc.ds_normalize))
              .epsilon(1e-9));
  }
}

TEST_CASE("fully unlabeled batch: supervised = 0, total = unsupervised + l2") {
  ModelConfig cfg = miniature_config();
  LossWeights w;
  w.beta = {0.2, 0.1};
  w.eta = {0.1, 0.1};
  w.gamma = 0.3;
  TrainConfig tc;
  auto trials = random_trials(cfg, 4, 9, 0);
  auto batch = make_batch<double>(ptrs(trials), cfg, nullptr);
  ParamStore<double> ps = init_params<double>(cfg, 2);
  Tape<double> tape;
  auto vs = register_params(tape, ps, false);
  auto fr = forward(tape, vs, ps, cfg, batch, RunMode::eval);
  auto lv = build_total_loss(tape, fr, batch, cfg, w, tc, ps.value("clf.centers"));
  CHECK(!lv.values.had_labeled);
  CHECK(lv.values.supervised == 0.0);
  CHECK(lv.values.ce == 0.0);
  CHECK(lv.values.center == 0.0);
  CHECK(lv.values.total ==
        doctest::Approx(lv.values.unsupervised + lv.values.l2_penalty).epsilon(1e-12));
}

TEST_CASE("gamma zero makes supervised equal cross entropy") {
  ModelConfig cfg = miniature_config();
  LossWeights w;
  w.beta = {0.0, 0.0};
  w.eta = {0.0, 0.0};
  w.gamma = 0.0;
  TrainConfig tc;
  auto trials = random_trials(cfg, 4, 9, 4);
  auto batch = make_batch<double>(ptrs(trials), cfg, nullptr);
  ParamStore<double> ps = init_params<double>(cfg, 2);
  Tape<double> tape;
  auto vs = register_params(tape, ps, false);
  auto fr = forward(tape, vs, ps, cfg, batch, RunMode::eval, nullptr, false);
  auto lv = build_total_loss(tape, fr, batch, cfg, w, tc, ps.value("clf.centers"));
  CHECK(lv.values.supervised == lv.values.ce);
  CHECK(lv.values.unsupervised == 0.0);
  CHECK(lv.values.total ==
        doctest::Approx(lv.values.ce + lv.values.l2_penalty).epsilon(1e-12));
}

TEST_CASE("the paper's default weights are accepted verbatim") {
  ModelConfig cfg = miniature_config();
  cfg.columns.push_back({2, 3, 2, 0.0, 4, 0.0, 4, 0.0, 2, 2, 2});
  LossWeights w;
  w.beta = {0.2, 0.1, 0.2};
  w.eta = {0.1, 0.1, 0.1};
  w.gamma = 0.3;
  TrainConfig tc;
  auto trials = random_trials(cfg, 3, 9, 2);
  auto batch = make_batch<double>(ptrs(trials), cfg, nullptr);
  ParamStore<double> ps = init_params<double>(cfg, 2);
  Tape<double> tape;
  auto vs = register_params(tape, ps, false);
  auto fr = forward(tape, vs, ps, cfg, batch, RunMode::eval);
  auto lv = build_total_loss(tape, fr, batch, cfg, w, tc, ps.value("clf.centers"));
  CHECK(std::isfinite(lv.values.total));
  CHECK(lv.values.total > 0.0);
}
