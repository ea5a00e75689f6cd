#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "ssda/tensor.hpp"

namespace ssda {

using VarId = int;

// Reverse-mode autodiff over a per-step tape. Every op records its output
// value plus a backward closure; backward(root) walks the tape in reverse
// and accumulates gradients into node.grad. Tapes are built fresh for each
// forward pass and discarded afterwards.
template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated by backward()
    std::function<void(Tape&, VarId)> back;
    bool needs_grad = false;
  };

  std::vector<Node> nodes;

  VarId leaf(Tensor<T> v, bool needs_grad) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    nodes.push_back(std::move(n));
    return static_cast<VarId>(nodes.size()) - 1;
  }

  VarId constant(Tensor<T> v) { return leaf(std::move(v), false); }

  const Tensor<T>& val(VarId id) const { return nodes[static_cast<size_t>(id)].value; }
  Tensor<T>& grad(VarId id) { return nodes[static_cast<size_t>(id)].grad; }
  bool needs_grad(VarId id) const { return nodes[static_cast<size_t>(id)].needs_grad; }

  // Seeds d(root)=1 (root must be scalar) and accumulates into every
  // reachable node with needs_grad set.
  void backward(VarId root) {
    check(val(root).numel() == 1, "backward: root must be scalar");
    for (auto& n : nodes) {
      n.grad = Tensor<T>(n.value.shape);
    }
    grad(root)[0] = T(1);
    for (VarId id = root; id >= 0; --id) {
      auto& n = nodes[static_cast<size_t>(id)];
      if (n.back && n.needs_grad) n.back(*this, id);
    }
  }

  // ---- op helpers -------------------------------------------------------

  VarId unary(VarId a, Tensor<T> out, std::function<void(Tape&, VarId)> back) {
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs_grad(a);
    if (n.needs_grad) n.back = std::move(back);
    nodes.push_back(std::move(n));
    return static_cast<VarId>(nodes.size()) - 1;
  }

  VarId nary(const std::vector<VarId>& ins, Tensor<T> out,
             std::function<void(Tape&, VarId)> back) {
    Node n;
    n.value = std::move(out);
    for (VarId a : ins) n.needs_grad = n.needs_grad || needs_grad(a);
    if (n.needs_grad) n.back = std::move(back);
    nodes.push_back(std::move(n));
    return static_cast<VarId>(nodes.size()) - 1;
  }

  // ---- elementwise ------------------------------------------------------

  VarId add(VarId a, VarId b) {
    check(val(a).same_shape(val(b)), "add: shape mismatch");
    Tensor<T> out = val(a);
    const auto& bv = val(b);
    for (long i = 0; i < out.numel(); ++i) out[i] += bv[i];
    return nary({a, b}, std::move(out), [a, b](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);
        for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (t.needs_grad(b)) {
        auto& gb = t.grad(b);
        for (long i = 0; i < g.numel(); ++i) gb[i] += g[i];
      }
    });
  }

  VarId sub(VarId a, VarId b) {
    check(val(a).same_shape(val(b)), "sub: shape mismatch");
    Tensor<T> out = val(a);
    const auto& bv = val(b);
    for (long i = 0; i < out.numel(); ++i) out[i] -= bv[i];
    return nary({a, b}, std::move(out), [a, b](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);
        for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (t.needs_grad(b)) {
        auto& gb = t.grad(b);
        for (long i = 0; i < g.numel(); ++i) gb[i] -= g[i];
      }
    });
  }

  VarId mul(VarId a, VarId b) {
    check(val(a).same_shape(val(b)), "mul: shape mismatch");
    Tensor<T> out = val(a);
    const auto& bv = val(b);
    for (long i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    return nary({a, b}, std::move(out), [a, b](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& av = t.val(a);
      const auto& bv2 = t.val(b);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);
        for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
      }
      if (t.needs_grad(b)) {
        auto& gb = t.grad(b);
        for (long i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }

  VarId scale(VarId a, double c) {
    Tensor<T> out = val(a);
    for (long i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(out[i] * c);
    return unary(a, std::move(out), [a, c](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < g.numel(); ++i) ga[i] += static_cast<T>(g[i] * c);
    });
  }

  VarId relu(VarId a) {
    Tensor<T> out = val(a);
    for (long i = 0; i < out.numel(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
    return unary(a, std::move(out), [a](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& yv = t.val(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < g.numel(); ++i)
        if (yv[i] > T(0)) ga[i] += g[i];
    });
  }

  VarId sigmoid(VarId a) {
    Tensor<T> out = val(a);
    for (long i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-out[i]));
    return unary(a, std::move(out), [a](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& yv = t.val(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * yv[i] * (T(1) - yv[i]);
    });
  }

  VarId tanh_op(VarId a) {
    Tensor<T> out = val(a);
    for (long i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return unary(a, std::move(out), [a](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& yv = t.val(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * (T(1) - yv[i] * yv[i]);
    });
  }

  // ---- linear algebra ---------------------------------------------------

  VarId matmul(VarId a, VarId b) {
    const auto& A = val(a);
    const auto& B = val(b);
    check(A.ndim() == 2 && B.ndim() == 2 && A.shape[1] == B.shape[0], "matmul: shape mismatch");
    long M = A.shape[0], K = A.shape[1], N = B.shape[1];
    Tensor<T> out({M, N});
    for (long i = 0; i < M; ++i)
      for (long k = 0; k < K; ++k) {
        T av = A.at(i, k);
        if (av == T(0)) continue;
        const T* brow = &B.data[static_cast<size_t>(k * N)];
        T* orow = &out.data[static_cast<size_t>(i * N)];
        for (long j = 0; j < N; ++j) orow[j] += av * brow[j];
      }
    return nary({a, b}, std::move(out), [a, b, M, K, N](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& A2 = t.val(a);
      const auto& B2 = t.val(b);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);  // dA = g * B^T
        for (long i = 0; i < M; ++i)
          for (long k = 0; k < K; ++k) {
            T s = T(0);
            const T* grow = &g.data[static_cast<size_t>(i * N)];
            const T* brow = &B2.data[static_cast<size_t>(k * N)];
            for (long j = 0; j < N; ++j) s += grow[j] * brow[j];
            ga.at(i, k) += s;
          }
      }
      if (t.needs_grad(b)) {
        auto& gb = t.grad(b);  // dB = A^T * g
        for (long k = 0; k < K; ++k)
          for (long i = 0; i < M; ++i) {
            T av = A2.at(i, k);
            if (av == T(0)) continue;
            const T* grow = &g.data[static_cast<size_t>(i * N)];
            T* brow = &gb.data[static_cast<size_t>(k * N)];
            for (long j = 0; j < N; ++j) brow[j] += av * grow[j];
          }
      }
    });
  }

  // M (R x C) + v (C), broadcast over rows.
  VarId add_rowvec(VarId a, VarId v) {
    const auto& A = val(a);
    const auto& V = val(v);
    check(A.ndim() == 2 && V.numel() == A.shape[1], "add_rowvec: shape mismatch");
    Tensor<T> out = A;
    long R = A.shape[0], C = A.shape[1];
    for (long i = 0; i < R; ++i)
      for (long j = 0; j < C; ++j) out.at(i, j) += V[j];
    return nary({a, v}, std::move(out), [a, v, R, C](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);
        for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (t.needs_grad(v)) {
        auto& gv = t.grad(v);
        for (long i = 0; i < R; ++i)
          for (long j = 0; j < C; ++j) gv[j] += g.at(i, j);
      }
    });
  }

  // M (R x C) scaled per-row by s (R x 1).
  VarId rowscale(VarId a, VarId s) {
    const auto& A = val(a);
    const auto& S = val(s);
    check(A.ndim() == 2 && S.numel() == A.shape[0], "rowscale: shape mismatch");
    long R = A.shape[0], C = A.shape[1];
    Tensor<T> out = A;
    for (long i = 0; i < R; ++i)
      for (long j = 0; j < C; ++j) out.at(i, j) *= S[i];
    return nary({a, s}, std::move(out), [a, s, R, C](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& A2 = t.val(a);
      const auto& S2 = t.val(s);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);
        for (long i = 0; i < R; ++i)
          for (long j = 0; j < C; ++j) ga.at(i, j) += g.at(i, j) * S2[i];
      }
      if (t.needs_grad(s)) {
        auto& gs = t.grad(s);
        for (long i = 0; i < R; ++i) {
          T acc = T(0);
          for (long j = 0; j < C; ++j) acc += g.at(i, j) * A2.at(i, j);
          gs[i] += acc;
        }
      }
    });
  }

  // ---- shape ops --------------------------------------------------------

  VarId reshape(VarId a, std::vector<long> shape) {
    check(Tensor<T>::numel_of(shape) == val(a).numel(), "reshape: numel mismatch");
    Tensor<T> out(std::move(shape), val(a).data);
    return unary(a, std::move(out), [a](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
  }

  VarId slice_cols(VarId a, long c0, long c1) {
    const auto& A = val(a);
    check(A.ndim() == 2 && 0 <= c0 && c0 < c1 && c1 <= A.shape[1], "slice_cols: bad range");
    long R = A.shape[0], W = c1 - c0;
    Tensor<T> out({R, W});
    for (long i = 0; i < R; ++i)
      for (long j = 0; j < W; ++j) out.at(i, j) = A.at(i, c0 + j);
    return unary(a, std::move(out), [a, c0, R, W](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < R; ++i)
        for (long j = 0; j < W; ++j) ga.at(i, c0 + j) += g.at(i, j);
    });
  }

  VarId concat_cols(const std::vector<VarId>& parts) {
    check(!parts.empty(), "concat_cols: no inputs");
    long R = val(parts[0]).shape[0];
    long Ctot = 0;
    for (VarId p : parts) {
      check(val(p).ndim() == 2 && val(p).shape[0] == R, "concat_cols: row mismatch");
      Ctot += val(p).shape[1];
    }
    Tensor<T> out({R, Ctot});
    long off = 0;
    for (VarId p : parts) {
      const auto& P = val(p);
      for (long i = 0; i < R; ++i)
        for (long j = 0; j < P.shape[1]; ++j) out.at(i, off + j) = P.at(i, j);
      off += P.shape[1];
    }
    auto ps = parts;
    return nary(parts, std::move(out), [ps, R](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      long off = 0;
      for (VarId p : ps) {
        long W = t.val(p).shape[1];
        if (t.needs_grad(p)) {
          auto& gp = t.grad(p);
          for (long i = 0; i < R; ++i)
            for (long j = 0; j < W; ++j) gp.at(i, j) += g.at(i, off + j);
        }
        off += W;
      }
    });
  }

  // Concatenate along dim 0; trailing dims must agree.
  VarId concat_rows(const std::vector<VarId>& parts) {
    check(!parts.empty(), "concat_rows: no inputs");
    std::vector<long> tail(val(parts[0]).shape.begin() + 1, val(parts[0]).shape.end());
    long rows = 0;
    for (VarId p : parts) {
      std::vector<long> t2(val(p).shape.begin() + 1, val(p).shape.end());
      check(t2 == tail, "concat_rows: trailing shape mismatch");
      rows += val(p).shape[0];
    }
    std::vector<long> oshape = {rows};
    oshape.insert(oshape.end(), tail.begin(), tail.end());
    Tensor<T> out(oshape);
    long off = 0;
    for (VarId p : parts) {
      const auto& P = val(p);
      std::copy(P.data.begin(), P.data.end(), out.data.begin() + off);
      off += P.numel();
    }
    auto ps = parts;
    return nary(parts, std::move(out), [ps](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      long off = 0;
      for (VarId p : ps) {
        long n = t.val(p).numel();
        if (t.needs_grad(p)) {
          auto& gp = t.grad(p);
          for (long i = 0; i < n; ++i) gp[i] += g[off + i];
        }
        off += n;
      }
    });
  }

  // Select rows (dim 0) by index; duplicates allowed, backward scatter-adds.
  VarId gather_rows(VarId a, std::vector<long> idx) {
    const auto& A = val(a);
    check(A.ndim() >= 1, "gather_rows: needs rows");
    long rest = A.numel() / std::max<long>(A.shape[0], 1);
    std::vector<long> oshape = A.shape;
    oshape[0] = static_cast<long>(idx.size());
    Tensor<T> out(oshape);
    for (size_t r = 0; r < idx.size(); ++r) {
      check(idx[r] >= 0 && idx[r] < A.shape[0], "gather_rows: index out of range");
      std::copy(A.data.begin() + idx[r] * rest, A.data.begin() + (idx[r] + 1) * rest,
                out.data.begin() + static_cast<long>(r) * rest);
    }
    return unary(a, std::move(out), [a, idx, rest](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& ga = t.grad(a);
      for (size_t r = 0; r < idx.size(); ++r)
        for (long i = 0; i < rest; ++i)
          ga[idx[r] * rest + i] += g[static_cast<long>(r) * rest + i];
    });
  }

  // ---- reductions -------------------------------------------------------

  VarId sum_all(VarId a) {
    T s = T(0);
    for (long i = 0; i < val(a).numel(); ++i) s += val(a)[i];
    return unary(a, Tensor<T>::scalar(s), [a](Tape& t, VarId y) {
      T g = t.grad(y)[0];
      auto& ga = t.grad(a);
      for (long i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
  }

  // ---- softmax / losses -------------------------------------------------

  // Row-wise softmax, stabilized by max subtraction.
  VarId softmax_rows(VarId a) {
    const auto& A = val(a);
    check(A.ndim() == 2, "softmax_rows: needs 2d");
    long R = A.shape[0], C = A.shape[1];
    Tensor<T> out({R, C});
    for (long i = 0; i < R; ++i) {
      T mx = A.at(i, 0);
      for (long j = 1; j < C; ++j) mx = std::max(mx, A.at(i, j));
      T denom = T(0);
      for (long j = 0; j < C; ++j) {
        out.at(i, j) = std::exp(A.at(i, j) - mx);
        denom += out.at(i, j);
      }
      for (long j = 0; j < C; ++j) out.at(i, j) /= denom;
    }
    return unary(a, std::move(out), [a, R, C](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& P = t.val(y);
      auto& ga = t.grad(a);
      for (long i = 0; i < R; ++i) {
        T dot = T(0);
        for (long j = 0; j < C; ++j) dot += g.at(i, j) * P.at(i, j);
        for (long j = 0; j < C; ++j) ga.at(i, j) += P.at(i, j) * (g.at(i, j) - dot);
      }
    });
  }

  // Mean negative log prob of the true class; probs clamped at 1e-12.
  VarId ce_from_probs(VarId probs, const std::vector<int>& labels) {
    const auto& P = val(probs);
    check(P.ndim() == 2 && static_cast<long>(labels.size()) == P.shape[0],
          "ce_from_probs: shape mismatch");
    long B = P.shape[0];
    const T floor_p = static_cast<T>(1e-12);
    T s = T(0);
    for (long i = 0; i < B; ++i) {
      check(labels[i] >= 0 && labels[i] < P.shape[1], "ce_from_probs: label out of range");
      s -= std::log(std::max(P.at(i, labels[i]), floor_p));
    }
    s /= static_cast<T>(B);
    return unary(probs, Tensor<T>::scalar(s), [probs, labels, B, floor_p](Tape& t, VarId y) {
      T g = t.grad(y)[0];
      const auto& P2 = t.val(probs);
      auto& gp = t.grad(probs);
      for (long i = 0; i < B; ++i) {
        T p = P2.at(i, labels[i]);
        if (p > floor_p) gp.at(i, labels[i]) -= g / (static_cast<T>(B) * p);
      }
    });
  }

  // 0.5 * sum_i ||f_i - centers[label_i]||^2 ; centers are a constant.
  VarId center_penalty(VarId feats, const std::vector<int>& labels, const Tensor<T>& centers) {
    const auto& F = val(feats);
    check(F.ndim() == 2 && static_cast<long>(labels.size()) == F.shape[0],
          "center_penalty: shape mismatch");
    check(centers.ndim() == 2 && centers.shape[1] == F.shape[1],
          "center_penalty: center dim mismatch");
    long B = F.shape[0], D = F.shape[1];
    T s = T(0);
    for (long i = 0; i < B; ++i) {
      check(labels[i] >= 0 && labels[i] < centers.shape[0], "center_penalty: label out of range");
      for (long j = 0; j < D; ++j) {
        T d = F.at(i, j) - centers.at(labels[i], j);
        s += d * d;
      }
    }
    s *= T(0.5);
    return unary(feats, Tensor<T>::scalar(s), [feats, labels, centers, B, D](Tape& t, VarId y) {
      T g = t.grad(y)[0];
      const auto& F2 = t.val(feats);
      auto& gf = t.grad(feats);
      for (long i = 0; i < B; ++i)
        for (long j = 0; j < D; ++j)
          gf.at(i, j) += g * (F2.at(i, j) - centers.at(labels[i], j));
    });
  }

  // Pairwise Euclidean distance matrix of rows; diagonal is exactly zero and
  // carries no gradient.
  VarId pairdist(VarId a) {
    const auto& X = val(a);
    check(X.ndim() == 2, "pairdist: needs 2d");
    long N = X.shape[0], D = X.shape[1];
    Tensor<T> out({N, N});
    for (long k = 0; k < N; ++k)
      for (long l = k + 1; l < N; ++l) {
        T s = T(0);
        for (long j = 0; j < D; ++j) {
          T d = X.at(k, j) - X.at(l, j);
          s += d * d;
        }
        T dist = std::sqrt(s);
        out.at(k, l) = dist;
        out.at(l, k) = dist;
      }
    return unary(a, std::move(out), [a, N, D](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& P = t.val(y);
      const auto& X2 = t.val(a);
      auto& gx = t.grad(a);
      const T tiny = static_cast<T>(1e-30);
      for (long k = 0; k < N; ++k)
        for (long l = 0; l < N; ++l) {
          if (k == l) continue;
          T gkl = g.at(k, l);
          if (gkl == T(0)) continue;
          T dist = P.at(k, l);
          if (dist < tiny) continue;
          T c = gkl / dist;
          for (long j = 0; j < D; ++j) {
            T diff = X2.at(k, j) - X2.at(l, j);
            gx.at(k, j) += c * diff;
            gx.at(l, j) -= c * diff;
          }
        }
    });
  }

  // Elementwise division by a scalar node value plus eps.
  VarId div_scalar(VarId a, VarId s, double eps) {
    const auto& A = val(a);
    check(val(s).numel() == 1, "div_scalar: divisor must be scalar");
    T denom = val(s)[0] + static_cast<T>(eps);
    Tensor<T> out = A;
    for (long i = 0; i < out.numel(); ++i) out[i] /= denom;
    return nary({a, s}, std::move(out), [a, s, eps](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      const auto& A2 = t.val(a);
      T denom = t.val(s)[0] + static_cast<T>(eps);
      if (t.needs_grad(a)) {
        auto& ga = t.grad(a);
        for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] / denom;
      }
      if (t.needs_grad(s)) {
        T acc = T(0);
        for (long i = 0; i < g.numel(); ++i) acc += g[i] * A2[i];
        t.grad(s)[0] -= acc / (denom * denom);
      }
    });
  }

  // ---- convolution / pooling / sampling ---------------------------------

  // Valid convolution where the kernel spans the full input height:
  // X (N, C, W) * K (F, C, k) + b (F) -> (N, F, W-k+1).
  VarId conv_fullheight(VarId x, VarId kern, VarId bias) {
    const auto& X = val(x);
    const auto& K = val(kern);
    const auto& B = val(bias);
    check(X.ndim() == 3 && K.ndim() == 3 && X.shape[1] == K.shape[1], "conv_fullheight: shape");
    check(K.shape[2] <= X.shape[2], "conv_fullheight: kernel wider than input");
    check(B.numel() == K.shape[0], "conv_fullheight: bias size");
    long N = X.shape[0], C = X.shape[1], W = X.shape[2];
    long F = K.shape[0], kw = K.shape[2], OW = W - kw + 1;
    Tensor<T> out({N, F, OW});
    for (long n = 0; n < N; ++n)
      for (long f = 0; f < F; ++f) {
        T* orow = &out.data[static_cast<size_t>((n * F + f) * OW)];
        for (long j = 0; j < OW; ++j) orow[j] = B[f];
        for (long c = 0; c < C; ++c) {
          const T* xrow = &X.data[static_cast<size_t>((n * C + c) * W)];
          const T* krow = &K.data[static_cast<size_t>((f * C + c) * kw)];
          for (long kk = 0; kk < kw; ++kk) {
            T w = krow[kk];
            if (w == T(0)) continue;
            for (long j = 0; j < OW; ++j) orow[j] += w * xrow[j + kk];
          }
        }
      }
    return nary({x, kern, bias}, std::move(out),
                [x, kern, bias, N, C, W, F, kw, OW](Tape& t, VarId y) {
                  const auto& g = t.grad(y);
                  const auto& X2 = t.val(x);
                  const auto& K2 = t.val(kern);
                  for (long n = 0; n < N; ++n)
                    for (long f = 0; f < F; ++f) {
                      const T* grow = &g.data[static_cast<size_t>((n * F + f) * OW)];
                      if (t.needs_grad(bias)) {
                        T s = T(0);
                        for (long j = 0; j < OW; ++j) s += grow[j];
                        t.grad(bias)[f] += s;
                      }
                      for (long c = 0; c < C; ++c) {
                        const T* xrow = &X2.data[static_cast<size_t>((n * C + c) * W)];
                        const T* krow = &K2.data[static_cast<size_t>((f * C + c) * kw)];
                        T* gxrow = t.needs_grad(x)
                                       ? &t.grad(x).data[static_cast<size_t>((n * C + c) * W)]
                                       : nullptr;
                        T* gkrow = t.needs_grad(kern)
                                       ? &t.grad(kern).data[static_cast<size_t>((f * C + c) * kw)]
                                       : nullptr;
                        for (long kk = 0; kk < kw; ++kk) {
                          if (gxrow) {
                            T w = krow[kk];
                            for (long j = 0; j < OW; ++j) gxrow[j + kk] += w * grow[j];
                          }
                          if (gkrow) {
                            T s = T(0);
                            for (long j = 0; j < OW; ++j) s += xrow[j + kk] * grow[j];
                            gkrow[kk] += s;
                          }
                        }
                      }
                    }
                });
  }

  // Same-padding 2D convolution: X (N, CI, H, W) * K (F, CI, kh, kw) + b (F)
  // -> (N, F, H, W). Odd kernels only (symmetric zero padding).
  VarId conv2d_same(VarId x, VarId kern, VarId bias) {
    const auto& X = val(x);
    const auto& K = val(kern);
    check(X.ndim() == 4 && K.ndim() == 4 && X.shape[1] == K.shape[1], "conv2d_same: shape");
    check(K.shape[2] % 2 == 1 && K.shape[3] % 2 == 1, "conv2d_same: kernel must be odd");
    check(val(bias).numel() == K.shape[0], "conv2d_same: bias size");
    long N = X.shape[0], CI = X.shape[1], H = X.shape[2], W = X.shape[3];
    long F = K.shape[0], kh = K.shape[2], kw = K.shape[3];
    long ph = kh / 2, pw = kw / 2;
    Tensor<T> out({N, F, H, W});
    const auto& Bv = val(bias);
    for (long n = 0; n < N; ++n)
      for (long f = 0; f < F; ++f)
        for (long i = 0; i < H; ++i)
          for (long j = 0; j < W; ++j) {
            T s = Bv[f];
            for (long c = 0; c < CI; ++c)
              for (long a = 0; a < kh; ++a) {
                long ii = i + a - ph;
                if (ii < 0 || ii >= H) continue;
                for (long b = 0; b < kw; ++b) {
                  long jj = j + b - pw;
                  if (jj < 0 || jj >= W) continue;
                  s += K.at(f, c, a, b) * X.at(n, c, ii, jj);
                }
              }
            out.at(n, f, i, j) = s;
          }
    return nary({x, kern, bias}, std::move(out),
                [x, kern, bias, N, CI, H, W, F, kh, kw, ph, pw](Tape& t, VarId y) {
                  const auto& g = t.grad(y);
                  const auto& X2 = t.val(x);
                  const auto& K2 = t.val(kern);
                  for (long n = 0; n < N; ++n)
                    for (long f = 0; f < F; ++f)
                      for (long i = 0; i < H; ++i)
                        for (long j = 0; j < W; ++j) {
                          T gv = g.at(n, f, i, j);
                          if (gv == T(0)) continue;
                          if (t.needs_grad(bias)) t.grad(bias)[f] += gv;
                          for (long c = 0; c < CI; ++c)
                            for (long a = 0; a < kh; ++a) {
                              long ii = i + a - ph;
                              if (ii < 0 || ii >= H) continue;
                              for (long b = 0; b < kw; ++b) {
                                long jj = j + b - pw;
                                if (jj < 0 || jj >= W) continue;
                                if (t.needs_grad(x))
                                  t.grad(x).at(n, c, ii, jj) += gv * K2.at(f, c, a, b);
                                if (t.needs_grad(kern))
                                  t.grad(kern).at(f, c, a, b) += gv * X2.at(n, c, ii, jj);
                              }
                            }
                        }
                });
  }

  // Max pool along the last axis of (N, F, W), stride == pool width,
  // trailing remainder discarded.
  VarId maxpool_w(VarId x, long pw) {
    const auto& X = val(x);
    check(X.ndim() == 3 && pw >= 1 && pw <= X.shape[2], "maxpool_w: bad pool width");
    long N = X.shape[0], F = X.shape[1], W = X.shape[2], OW = W / pw;
    check(OW >= 1, "maxpool_w: output empty");
    Tensor<T> out({N, F, OW});
    auto argmax = std::make_shared<std::vector<long>>(static_cast<size_t>(N * F * OW));
    for (long n = 0; n < N; ++n)
      for (long f = 0; f < F; ++f)
        for (long j = 0; j < OW; ++j) {
          long base = j * pw;
          long best = base;
          T bv = X.at(n, f, base);
          for (long k = 1; k < pw; ++k)
            if (X.at(n, f, base + k) > bv) {
              bv = X.at(n, f, base + k);
              best = base + k;
            }
          out.at(n, f, j) = bv;
          (*argmax)[static_cast<size_t>((n * F + f) * OW + j)] = best;
        }
    return unary(x, std::move(out), [x, argmax, N, F, OW](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& gx = t.grad(x);
      long W2 = t.val(x).shape[2];
      for (long n = 0; n < N; ++n)
        for (long f = 0; f < F; ++f)
          for (long j = 0; j < OW; ++j)
            gx.data[static_cast<size_t>((n * F + f) * W2 +
                                        (*argmax)[static_cast<size_t>((n * F + f) * OW + j)])] +=
                g.at(n, f, j);
    });
  }

  // Nearest-neighbour upsampling of (N, C, H, W) by integer factors.
  VarId upsample_nearest(VarId x, long ry, long rx) {
    const auto& X = val(x);
    check(X.ndim() == 4 && ry >= 1 && rx >= 1, "upsample_nearest: bad factors");
    long N = X.shape[0], C = X.shape[1], H = X.shape[2], W = X.shape[3];
    Tensor<T> out({N, C, H * ry, W * rx});
    for (long n = 0; n < N; ++n)
      for (long c = 0; c < C; ++c)
        for (long i = 0; i < H * ry; ++i)
          for (long j = 0; j < W * rx; ++j)
            out.at(n, c, i, j) = X.at(n, c, i / ry, j / rx);
    return unary(x, std::move(out), [x, ry, rx, N, C, H, W](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& gx = t.grad(x);
      for (long n = 0; n < N; ++n)
        for (long c = 0; c < C; ++c)
          for (long i = 0; i < H * ry; ++i)
            for (long j = 0; j < W * rx; ++j) gx.at(n, c, i / ry, j / rx) += g.at(n, c, i, j);
    });
  }

  // Bilinear resize of (N, C, H, W) to (N, C, OH, OW), half-pixel centers,
  // edges clamped. Deterministic linear map; backward is its transpose.
  VarId resize_bilinear(VarId x, long OH, long OW) {
    const auto& X = val(x);
    check(X.ndim() == 4 && OH >= 1 && OW >= 1, "resize_bilinear: bad target");
    long N = X.shape[0], C = X.shape[1], H = X.shape[2], W = X.shape[3];
    struct Lerp {
      long i0, i1;
      T w1;  // weight of i1; weight of i0 is 1-w1
    };
    auto make_axis = [](long in, long outn) {
      std::vector<Lerp> v(static_cast<size_t>(outn));
      for (long o = 0; o < outn; ++o) {
        double src = (static_cast<double>(o) + 0.5) * static_cast<double>(in) /
                         static_cast<double>(outn) -
                     0.5;
        if (src < 0) src = 0;
        if (src > static_cast<double>(in - 1)) src = static_cast<double>(in - 1);
        long i0 = static_cast<long>(src);
        long i1 = std::min(i0 + 1, in - 1);
        v[static_cast<size_t>(o)] = {i0, i1, static_cast<T>(src - static_cast<double>(i0))};
      }
      return v;
    };
    auto ay = std::make_shared<std::vector<Lerp>>(make_axis(H, OH));
    auto ax = std::make_shared<std::vector<Lerp>>(make_axis(W, OW));
    Tensor<T> out({N, C, OH, OW});
    for (long n = 0; n < N; ++n)
      for (long c = 0; c < C; ++c)
        for (long i = 0; i < OH; ++i) {
          const auto& ly = (*ay)[static_cast<size_t>(i)];
          for (long j = 0; j < OW; ++j) {
            const auto& lx = (*ax)[static_cast<size_t>(j)];
            T v00 = X.at(n, c, ly.i0, lx.i0), v01 = X.at(n, c, ly.i0, lx.i1);
            T v10 = X.at(n, c, ly.i1, lx.i0), v11 = X.at(n, c, ly.i1, lx.i1);
            T top = v00 + lx.w1 * (v01 - v00);
            T bot = v10 + lx.w1 * (v11 - v10);
            out.at(n, c, i, j) = top + ly.w1 * (bot - top);
          }
        }
    return unary(x, std::move(out), [x, ay, ax, N, C, OH, OW](Tape& t, VarId y) {
      const auto& g = t.grad(y);
      auto& gx = t.grad(x);
      for (long n = 0; n < N; ++n)
        for (long c = 0; c < C; ++c)
          for (long i = 0; i < OH; ++i) {
            const auto& ly = (*ay)[static_cast<size_t>(i)];
            for (long j = 0; j < OW; ++j) {
              const auto& lx = (*ax)[static_cast<size_t>(j)];
              T gv = g.at(n, c, i, j);
              T wy0 = T(1) - ly.w1, wx0 = T(1) - lx.w1;
              gx.at(n, c, ly.i0, lx.i0) += gv * wy0 * wx0;
              gx.at(n, c, ly.i0, lx.i1) += gv * wy0 * lx.w1;
              gx.at(n, c, ly.i1, lx.i0) += gv * ly.w1 * wx0;
              gx.at(n, c, ly.i1, lx.i1) += gv * ly.w1 * lx.w1;
            }
          }
    });
  }

  // ---- batch normalization ----------------------------------------------
  // Channel axis is dim 1; statistics reduce over every other axis.

  struct BnOut {
    VarId y;
    std::vector<T> batch_mean;
    std::vector<T> batch_var;  // biased (1/N)
  };

  BnOut batchnorm_train(VarId x, VarId gamma, VarId beta, double eps) {
    const auto& X = val(x);
    check(X.ndim() >= 2, "batchnorm: needs channel axis");
    long Cch = X.shape[1];
    check(val(gamma).numel() == Cch && val(beta).numel() == Cch, "batchnorm: affine size");
    long N0 = X.shape[0];
    long inner = X.numel() / (N0 * Cch);
    long red = N0 * inner;  // elements per channel
    std::vector<T> mean(static_cast<size_t>(Cch), T(0)), var(static_cast<size_t>(Cch), T(0));
    auto idx = [&](long n, long c, long i) { return (n * Cch + c) * inner + i; };
    for (long c = 0; c < Cch; ++c) {
      T s = T(0);
      for (long n = 0; n < N0; ++n)
        for (long i = 0; i < inner; ++i) s += X[idx(n, c, i)];
      mean[static_cast<size_t>(c)] = s / static_cast<T>(red);
    }
    for (long c = 0; c < Cch; ++c) {
      T s = T(0);
      for (long n = 0; n < N0; ++n)
        for (long i = 0; i < inner; ++i) {
          T d = X[idx(n, c, i)] - mean[static_cast<size_t>(c)];
          s += d * d;
        }
      var[static_cast<size_t>(c)] = s / static_cast<T>(red);
    }
    auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(Cch));
    for (long c = 0; c < Cch; ++c)
      (*invstd)[static_cast<size_t>(c)] =
          T(1) / std::sqrt(var[static_cast<size_t>(c)] + static_cast<T>(eps));
    auto xhat = std::make_shared<Tensor<T>>(X.shape);
    Tensor<T> out(X.shape);
    const auto& G = val(gamma);
    const auto& Bt = val(beta);
    for (long n = 0; n < N0; ++n)
      for (long c = 0; c < Cch; ++c)
        for (long i = 0; i < inner; ++i) {
          T xh = (X[idx(n, c, i)] - mean[static_cast<size_t>(c)]) * (*invstd)[static_cast<size_t>(c)];
          (*xhat)[idx(n, c, i)] = xh;
          out[idx(n, c, i)] = G[c] * xh + Bt[c];
        }
    VarId y = nary({x, gamma, beta}, std::move(out),
                   [x, gamma, beta, xhat, invstd, N0, Cch, inner, red](Tape& t, VarId yid) {
                     const auto& g = t.grad(yid);
                     const auto& G2 = t.val(gamma);
                     auto idx2 = [&](long n, long c, long i) { return (n * Cch + c) * inner + i; };
                     for (long c = 0; c < Cch; ++c) {
                       T sum_g = T(0), sum_gx = T(0);
                       for (long n = 0; n < N0; ++n)
                         for (long i = 0; i < inner; ++i) {
                           sum_g += g[idx2(n, c, i)];
                           sum_gx += g[idx2(n, c, i)] * (*xhat)[idx2(n, c, i)];
                         }
                       if (t.needs_grad(gamma)) t.grad(gamma)[c] += sum_gx;
                       if (t.needs_grad(beta)) t.grad(beta)[c] += sum_g;
                       if (t.needs_grad(x)) {
                         T mg = sum_g / static_cast<T>(red);
                         T mgx = sum_gx / static_cast<T>(red);
                         T k = G2[c] * (*invstd)[static_cast<size_t>(c)];
                         auto& gx = t.grad(x);
                         for (long n = 0; n < N0; ++n)
                           for (long i = 0; i < inner; ++i)
                             gx[idx2(n, c, i)] +=
                                 k * (g[idx2(n, c, i)] - mg - (*xhat)[idx2(n, c, i)] * mgx);
                       }
                     }
                   });
    return {y, std::move(mean), std::move(var)};
  }

  VarId batchnorm_eval(VarId x, VarId gamma, VarId beta, const std::vector<T>& rmean,
                       const std::vector<T>& rvar, double eps) {
    const auto& X = val(x);
    check(X.ndim() >= 2, "batchnorm: needs channel axis");
    long Cch = X.shape[1];
    check(static_cast<long>(rmean.size()) == Cch && static_cast<long>(rvar.size()) == Cch,
          "batchnorm_eval: running stats size");
    long N0 = X.shape[0];
    long inner = X.numel() / (N0 * Cch);
    auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(Cch));
    auto mean = std::make_shared<std::vector<T>>(rmean);
    for (long c = 0; c < Cch; ++c)
      (*invstd)[static_cast<size_t>(c)] =
          T(1) / std::sqrt(rvar[static_cast<size_t>(c)] + static_cast<T>(eps));
    Tensor<T> out(X.shape);
    const auto& G = val(gamma);
    const auto& Bt = val(beta);
    auto idx = [&](long n, long c, long i) { return (n * Cch + c) * inner + i; };
    for (long n = 0; n < N0; ++n)
      for (long c = 0; c < Cch; ++c)
        for (long i = 0; i < inner; ++i)
          out[idx(n, c, i)] =
              G[c] * (X[idx(n, c, i)] - (*mean)[static_cast<size_t>(c)]) *
                  (*invstd)[static_cast<size_t>(c)] +
              Bt[c];
    return nary({x, gamma, beta}, std::move(out),
                [x, gamma, beta, mean, invstd, N0, Cch, inner](Tape& t, VarId yid) {
                  const auto& g = t.grad(yid);
                  const auto& X2 = t.val(x);
                  const auto& G2 = t.val(gamma);
                  auto idx2 = [&](long n, long c, long i) { return (n * Cch + c) * inner + i; };
                  for (long c = 0; c < Cch; ++c) {
                    T is = (*invstd)[static_cast<size_t>(c)];
                    T mu = (*mean)[static_cast<size_t>(c)];
                    for (long n = 0; n < N0; ++n)
                      for (long i = 0; i < inner; ++i) {
                        T gv = g[idx2(n, c, i)];
                        if (t.needs_grad(x)) t.grad(x)[idx2(n, c, i)] += gv * G2[c] * is;
                        if (t.needs_grad(gamma))
                          t.grad(gamma)[c] += gv * (X2[idx2(n, c, i)] - mu) * is;
                        if (t.needs_grad(beta)) t.grad(beta)[c] += gv;
                      }
                  }
                });
  }
};

}  // namespace ssda
