#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "ssda/rng.hpp"
#include "ssda/tape.hpp"

using namespace ssda;
using namespace ssda::testutil;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(11);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  auto w = random_tensor({3, 4}, rng);

  auto err_add = fd_max_rel_err({a, b}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.add(in[0], in[1]), w);
  });
  CHECK(err_add < kTol);

  auto err_sub = fd_max_rel_err({a, b}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.sub(in[0], in[1]), w);
  });
  CHECK(err_sub < kTol);

  auto err_mul = fd_max_rel_err({a, b}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.mul(in[0], in[1]), w);
  });
  CHECK(err_mul < kTol);

  auto err_scale = fd_max_rel_err({a}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.scale(in[0], -2.5), w);
  });
  CHECK(err_scale < kTol);
}

TEST_CASE("activations match finite differences") {
  Rng rng(12);
  // Keep values away from the ReLU kink so central differences are valid.
  auto a = random_tensor({4, 5}, rng);
  for (long i = 0; i < a.numel(); ++i)
    if (std::abs(a[i]) < 0.05) a[i] += 0.1;
  auto w = random_tensor({4, 5}, rng);

  for (auto op : {0, 1, 2}) {
    auto err = fd_max_rel_err({a}, [&](DTape& t, const std::vector<VarId>& in) {
      VarId y = op == 0 ? t.relu(in[0]) : op == 1 ? t.sigmoid(in[0]) : t.tanh_op(in[0]);
      return weighted_sum(t, y, w);
    });
    CHECK(err < kTol);
  }
}

TEST_CASE("matmul and broadcast ops match finite differences") {
  Rng rng(13);
  auto A = random_tensor({3, 4}, rng);
  auto B = random_tensor({4, 5}, rng);
  auto v = random_tensor({5}, rng);
  auto s = random_tensor({3}, rng);
  auto w35 = random_tensor({3, 5}, rng);
  auto w34 = random_tensor({3, 4}, rng);

  auto err_mm = fd_max_rel_err({A, B}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.matmul(in[0], in[1]), w35);
  });
  CHECK(err_mm < kTol);

  auto err_bias = fd_max_rel_err({A, B, v}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.add_rowvec(t.matmul(in[0], in[1]), in[2]), w35);
  });
  CHECK(err_bias < kTol);

  auto err_rs = fd_max_rel_err({A, s}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.rowscale(in[0], in[1]), w34);
  });
  CHECK(err_rs < kTol);
}

TEST_CASE("shape ops match finite differences") {
  Rng rng(14);
  auto A = random_tensor({3, 6}, rng);
  auto B = random_tensor({2, 6}, rng);
  auto w = random_tensor({3, 3}, rng);
  auto wcat = random_tensor({5, 6}, rng);
  auto wg = random_tensor({4, 6}, rng);

  auto err_slice = fd_max_rel_err({A}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.slice_cols(in[0], 2, 5), w);
  });
  CHECK(err_slice < kTol);

  auto err_ccols = fd_max_rel_err({A, B}, [&](DTape& t, const std::vector<VarId>& in) {
    return t.sum_all(t.concat_cols({in[0], t.reshape(in[1], {3, 4})}));
  });
  CHECK(err_ccols < kTol);

  auto err_crows = fd_max_rel_err({A, B}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.concat_rows({in[0], in[1]}), wcat);
  });
  CHECK(err_crows < kTol);

  std::vector<long> idx = {0, 2, 2, 1};
  auto err_gather = fd_max_rel_err({A}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.gather_rows(in[0], idx), wg);
  });
  CHECK(err_gather < kTol);

  auto err_reshape = fd_max_rel_err({A}, [&](DTape& t, const std::vector<VarId>& in) {
    return t.sum_all(t.mul(t.reshape(in[0], {6, 3}), t.reshape(in[0], {6, 3})));
  });
  CHECK(err_reshape < kTol);
}

TEST_CASE("softmax and cross entropy match finite differences") {
  Rng rng(15);
  auto logits = random_tensor({5, 4}, rng, -2.0, 2.0);
  auto w = random_tensor({5, 4}, rng);
  std::vector<int> labels = {0, 3, 1, 2, 2};

  auto err_sm = fd_max_rel_err({logits}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.softmax_rows(in[0]), w);
  });
  CHECK(err_sm < kTol);

  auto err_ce = fd_max_rel_err({logits}, [&](DTape& t, const std::vector<VarId>& in) {
    return t.ce_from_probs(t.softmax_rows(in[0]), labels);
  });
  CHECK(err_ce < kTol);
}

TEST_CASE("center penalty gradient is exactly feature minus center") {
  DTensor feats({2, 3}, {1.0, 0.0, 2.0, -1.0, 0.5, 0.25});
  DTensor centers({2, 3}, {0.5, 0.5, 0.5, 0.0, 0.0, 0.0});
  std::vector<int> labels = {0, 1};
  DTape t;
  VarId f = t.leaf(feats, true);
  VarId loss = t.center_penalty(f, labels, centers);
  t.backward(loss);
  for (long i = 0; i < 2; ++i)
    for (long j = 0; j < 3; ++j)
      CHECK(t.grad(f).at(i, j) == feats.at(i, j) - centers.at(labels[(size_t)i], j));
}

TEST_CASE("pairdist and div_scalar match finite differences") {
  Rng rng(16);
  auto X = random_tensor({4, 3}, rng);
  auto wp = random_tensor({4, 4}, rng);
  for (long i = 0; i < 4; ++i) wp.at(i, i) = 0.0;  // diagonal carries no signal

  auto err_pd = fd_max_rel_err({X}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.pairdist(in[0]), wp);
  });
  CHECK(err_pd < kTol);

  auto err_div = fd_max_rel_err({X}, [&](DTape& t, const std::vector<VarId>& in) {
    VarId P = t.pairdist(in[0]);
    VarId mu = t.scale(t.sum_all(P), 1.0 / 12.0);
    return weighted_sum(t, t.div_scalar(P, mu, 1e-12), wp);
  });
  CHECK(err_div < kTol);
}

TEST_CASE("convolutions match finite differences") {
  Rng rng(17);
  auto X = random_tensor({2, 3, 8}, rng);
  auto K = random_tensor({4, 3, 3}, rng);
  auto b = random_tensor({4}, rng);
  auto w = random_tensor({2, 4, 6}, rng);

  auto err_cv = fd_max_rel_err({X, K, b}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.conv_fullheight(in[0], in[1], in[2]), w);
  });
  CHECK(err_cv < kTol);

  auto X2 = random_tensor({2, 2, 4, 5}, rng);
  auto K2 = random_tensor({3, 2, 3, 3}, rng);
  auto b2 = random_tensor({3}, rng);
  auto w2 = random_tensor({2, 3, 4, 5}, rng);

  auto err_cs = fd_max_rel_err({X2, K2, b2}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.conv2d_same(in[0], in[1], in[2]), w2);
  });
  CHECK(err_cs < kTol);

  auto K1 = random_tensor({1, 2, 1, 1}, rng);
  auto b1 = random_tensor({1}, rng);
  auto w1 = random_tensor({2, 1, 4, 5}, rng);
  auto err_c1 = fd_max_rel_err({X2, K1, b1}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.conv2d_same(in[0], in[1], in[2]), w1);
  });
  CHECK(err_c1 < kTol);
}

TEST_CASE("maxpool, upsample and resize match finite differences") {
  Rng rng(18);
  auto X = random_tensor({2, 3, 9}, rng);
  auto w = random_tensor({2, 3, 3}, rng);

  auto err_mp = fd_max_rel_err({X}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.maxpool_w(in[0], 3), w);
  });
  CHECK(err_mp < kTol);

  auto X2 = random_tensor({2, 2, 3, 4}, rng);
  auto wu = random_tensor({2, 2, 6, 8}, rng);
  auto err_up = fd_max_rel_err({X2}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.upsample_nearest(in[0], 2, 2), wu);
  });
  CHECK(err_up < kTol);

  auto wr = random_tensor({2, 2, 5, 7}, rng);
  auto err_rz = fd_max_rel_err({X2}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.resize_bilinear(in[0], 5, 7), wr);
  });
  CHECK(err_rz < kTol);
}

TEST_CASE("batchnorm train and eval match finite differences") {
  Rng rng(19);
  auto X = random_tensor({3, 2, 5}, rng);
  auto gm = random_tensor({2}, rng, 0.5, 1.5);
  auto bt = random_tensor({2}, rng);
  auto w = random_tensor({3, 2, 5}, rng);

  auto err_tr = fd_max_rel_err(
      {X, gm, bt},
      [&](DTape& t, const std::vector<VarId>& in) {
        auto bn = t.batchnorm_train(in[0], in[1], in[2], 1e-3);
        return weighted_sum(t, bn.y, w);
      },
      1e-5);
  CHECK(err_tr < 1e-5);

  std::vector<double> rm = {0.1, -0.2}, rv = {0.9, 1.4};
  auto err_ev = fd_max_rel_err({X, gm, bt}, [&](DTape& t, const std::vector<VarId>& in) {
    return weighted_sum(t, t.batchnorm_eval(in[0], in[1], in[2], rm, rv, 1e-3), w);
  });
  CHECK(err_ev < kTol);

  // Train-mode statistics are the plain per-channel batch moments.
  DTape t;
  VarId x = t.leaf(X, false);
  VarId g = t.leaf(gm, false);
  VarId bb = t.leaf(bt, false);
  auto bn = t.batchnorm_train(x, g, bb, 1e-3);
  for (long c = 0; c < 2; ++c) {
    double mean = 0;
    for (long n = 0; n < 3; ++n)
      for (long i = 0; i < 5; ++i) mean += X.at(n, c, i);
    mean /= 15.0;
    CHECK(bn.batch_mean[(size_t)c] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("fan-out accumulates gradients") {
  // y = sum(x*x + x*x) -> dy/dx = 4x
  DTensor x({3}, {1.0, -2.0, 0.5});
  DTape t;
  VarId xv = t.leaf(x, true);
  VarId y = t.add(t.mul(xv, xv), t.mul(xv, xv));
  t.backward(t.sum_all(y));
  for (long i = 0; i < 3; ++i) CHECK(t.grad(xv)[i] == doctest::Approx(4.0 * x[i]));
}

TEST_CASE("maxpool discards trailing remainder") {
  DTensor x({1, 1, 7}, {1, 5, 2, 4, 3, 9, 100});
  DTape t;
  VarId xv = t.leaf(x, false);
  VarId y = t.maxpool_w(xv, 3);
  CHECK(t.val(y).shape == std::vector<long>{1, 1, 2});
  CHECK(t.val(y)[0] == 5);
  CHECK(t.val(y)[1] == 9);
}
