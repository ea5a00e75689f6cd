#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ssda/config.hpp"
#include "ssda/rng.hpp"
#include "ssda/tape.hpp"
#include "ssda/tensor.hpp"
#include "ssda/types.hpp"
#include "ssda/windowing.hpp"

namespace ssda {

constexpr double kBnEps = 1e-3;
constexpr double kBnMomentum = 0.99;

enum class RunMode { train, eval };

// ============================================================================
// Parameter store
// ============================================================================

// Named parameter tensors in a fixed insertion order. Trainable tensors get
// gradients and Adam state; the rest (batch-norm running stats, class
// centers) are model state updated outside the gradient path.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    Tensor<T> value;
    bool trainable = true;
  };

  void add(const std::string& name, Tensor<T> value, bool trainable = true) {
    check(!params_.count(name), "param '" + name + "' already exists");
    order_.push_back(name);
    params_[name] = {std::move(value), trainable};
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  Tensor<T>& value(const std::string& name) {
    auto it = params_.find(name);
    check(it != params_.end(), "unknown param '" + name + "'");
    return it->second.value;
  }
  const Tensor<T>& value(const std::string& name) const {
    auto it = params_.find(name);
    check(it != params_.end(), "unknown param '" + name + "'");
    return it->second.value;
  }
  bool trainable(const std::string& name) const {
    auto it = params_.find(name);
    check(it != params_.end(), "unknown param '" + name + "'");
    return it->second.trainable;
  }

  const std::vector<std::string>& names() const { return order_; }

  long count_trainable() const {
    long n = 0;
    for (const auto& name : order_)
      if (params_.at(name).trainable) n += params_.at(name).value.numel();
    return n;
  }
  long count_state() const {
    long n = 0;
    for (const auto& name : order_)
      if (!params_.at(name).trainable) n += params_.at(name).value.numel();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& name : order_)
      out.add(name, params_.at(name).value.template cast<U>(), params_.at(name).trainable);
    return out;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, Entry> params_;
};

// ============================================================================
// Initialization
// ============================================================================

namespace detail {

template <typename T>
Tensor<T> fanin_uniform(std::vector<long> shape, long fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double lim = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-lim, lim));
  return t;
}

template <typename T>
void add_bn(ParamStore<T>& ps, const std::string& prefix, long channels) {
  ps.add(prefix + ".gamma", Tensor<T>::full({channels}, T(1)));
  ps.add(prefix + ".beta", Tensor<T>::zeros({channels}));
  ps.add(prefix + ".rmean", Tensor<T>::zeros({channels}), false);
  ps.add(prefix + ".rvar", Tensor<T>::full({channels}, T(1)), false);
}

template <typename T>
void add_lstm(ParamStore<T>& ps, const std::string& prefix, long in_dim, long hidden, Rng& rng) {
  ps.add(prefix + ".wx", fanin_uniform<T>({in_dim, 4 * hidden}, in_dim, rng));
  ps.add(prefix + ".wh", fanin_uniform<T>({hidden, 4 * hidden}, hidden, rng));
  ps.add(prefix + ".b", Tensor<T>::zeros({4 * hidden}));
}

}  // namespace detail

// Deterministic given the seed: weights fan-in-scaled uniform, biases zero,
// batch-norm scale 1 / shift 0, class centers zero.
template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, uint64_t seed) {
  auto violations = validate_config(cfg);
  check(violations.empty(), violations.empty() ? "" : "init_params: " + violations[0]);
  Rng rng = Rng(seed).fork(0x6d6f64656cULL);

  ParamStore<T> ps;
  for (long ci : cfg.active_columns()) {
    const ColumnSpec& cs = cfg.columns[static_cast<size_t>(ci)];
    std::string col = "col" + std::to_string(ci + 1);
    long flat = cfg.flatten_width(ci);
    if (cfg.use_cnn) {
      ps.add(col + ".enc.conv.w",
             detail::fanin_uniform<T>({cs.conv_filters, cfg.channels, cs.conv_kernel},
                                      cfg.channels * cs.conv_kernel, rng));
      ps.add(col + ".enc.conv.b", Tensor<T>::zeros({cs.conv_filters}));
      detail::add_bn(ps, col + ".enc.bn", cs.conv_filters);
    } else {
      long in = cfg.channels * cfg.window_len;
      ps.add(col + ".enc.proj.w", detail::fanin_uniform<T>({in, flat}, in, rng));
      ps.add(col + ".enc.proj.b", Tensor<T>::zeros({flat}));
    }
    if (cfg.use_lstm)
      detail::add_lstm(ps, col + ".enc.lstm", flat, cs.enc_lstm_units, rng);
    long d = cfg.latent_width(ci);
    if (cfg.use_attention) {
      ps.add(col + ".enc.attn.w", detail::fanin_uniform<T>({d, 1}, d, rng));
      ps.add(col + ".enc.attn.b", Tensor<T>::zeros({1}));
    }
    detail::add_lstm(ps, col + ".dec.lstm", d, cs.dec_lstm_units, rng);
    detail::add_bn(ps, col + ".dec.bn1", 1);
    ps.add(col + ".dec.conv7.w",
           detail::fanin_uniform<T>({cs.dec_conv_filters, 1, 7, 7}, 49, rng));
    ps.add(col + ".dec.conv7.b", Tensor<T>::zeros({cs.dec_conv_filters}));
    detail::add_bn(ps, col + ".dec.bn2", cs.dec_conv_filters);
    ps.add(col + ".dec.conv1.w",
           detail::fanin_uniform<T>({1, cs.dec_conv_filters, 1, 1}, cs.dec_conv_filters, rng));
    ps.add(col + ".dec.conv1.b", Tensor<T>::zeros({1}));
  }
  long concat = cfg.concat_latent_width();
  ps.add("clf.fc1.w", detail::fanin_uniform<T>({concat, cfg.fc_hidden}, concat, rng));
  ps.add("clf.fc1.b", Tensor<T>::zeros({cfg.fc_hidden}));
  ps.add("clf.fc2.w", detail::fanin_uniform<T>({cfg.fc_hidden, cfg.class_count}, cfg.fc_hidden, rng));
  ps.add("clf.fc2.b", Tensor<T>::zeros({cfg.class_count}));
  ps.add("clf.centers", Tensor<T>::zeros({cfg.class_count, cfg.fc_hidden}), false);
  return ps;
}

// ============================================================================
// Forward pass
// ============================================================================

// Tape leaf per parameter, resolved by name.
template <typename T>
struct VarStore {
  std::map<std::string, VarId> ids;
  VarId at(const std::string& name) const {
    auto it = ids.find(name);
    check(it != ids.end(), "unknown param var '" + name + "'");
    return it->second;
  }
};

template <typename T>
VarStore<T> register_params(Tape<T>& tape, const ParamStore<T>& ps, bool with_grad) {
  VarStore<T> vs;
  for (const auto& name : ps.names())
    vs.ids[name] = tape.leaf(ps.value(name), with_grad && ps.trainable(name));
  return vs;
}

// Input batch in model layout: windows trial-major, raw trials flattened.
template <typename T>
struct Batch {
  long B = 0;   // trials
  long n = 0;   // windows per trial
  Tensor<T> windows;   // (B*n, C, m), window j of trial i at row i*n+j
  Tensor<T> raw_flat;  // (B, C*T)
  std::vector<int> labels;       // per trial; -1 = none visible
  std::vector<std::string> ids;  // trial ids
};

template <typename T>
Batch<T> make_batch(const std::vector<const Trial*>& trials, const ModelConfig& cfg,
                    const LabelMask* mask) {
  check(!trials.empty(), "make_batch: empty batch");
  long C = trials[0]->channels, Tlen = trials[0]->samples;
  for (const Trial* t : trials)
    check(t->channels == C && t->samples == Tlen, "make_batch: trials must share C and T");
  long n = window_count(Tlen, cfg.window_len, cfg.step);
  check(n >= 1, "make_batch: trial shorter than one window");
  long B = static_cast<long>(trials.size());

  Batch<T> b;
  b.B = B;
  b.n = n;
  b.windows = Tensor<T>({B * n, C, cfg.window_len});
  b.raw_flat = Tensor<T>({B, C * Tlen});
  for (long i = 0; i < B; ++i) {
    const Trial& tr = *trials[static_cast<size_t>(i)];
    for (long j = 0; j < n; ++j) {
      long off = j * cfg.step;
      for (long c = 0; c < C; ++c)
        for (long x = 0; x < cfg.window_len; ++x)
          b.windows.at(i * n + j, c, x) = static_cast<T>(tr.at(c, off + x));
    }
    for (long c = 0; c < C; ++c)
      for (long x = 0; x < Tlen; ++x)
        b.raw_flat.at(i, c * Tlen + x) = static_cast<T>(tr.at(c, x));
    bool labeled = tr.has_label() && (!mask || mask->is_labeled(tr.trial_id));
    b.labels.push_back(labeled ? tr.label : -1);
    b.ids.push_back(tr.trial_id);
  }
  return b;
}

template <typename T>
struct ColumnForward {
  long column = 0;            // model column index
  std::vector<VarId> h_enc;   // n vars, each (B x d)
  VarId alpha = -1;           // (B x n)
  VarId latent = -1;          // (B x d)
  VarId recon = -1;           // (B*n, C, m), trial-major
};

template <typename T>
struct ForwardResult {
  long B = 0, n = 0;
  std::vector<ColumnForward<T>> columns;
  VarId latent_concat = -1;  // (B, sum d)
  VarId features = -1;       // (B, fc_hidden)
  VarId logits = -1;         // (B, K)
  VarId probs = -1;          // (B, K)
  VarId l2_penalty = -1;     // scalar
  std::vector<std::tuple<std::string, std::vector<T>, std::vector<T>>> bn_stats;
};

namespace detail {

template <typename T>
VarId dropout(Tape<T>& tape, VarId x, double rate, RunMode mode, Rng* rng) {
  if (mode != RunMode::train || rate <= 0.0) return x;
  check(rng != nullptr, "dropout: train mode needs an rng");
  Tensor<T> mask(tape.val(x).shape);
  T keep_inv = static_cast<T>(1.0 / (1.0 - rate));
  for (long i = 0; i < mask.numel(); ++i)
    mask[i] = rng->uniform() >= rate ? keep_inv : T(0);
  return tape.mul(x, tape.constant(std::move(mask)));
}

// Constant dropout mask shared across LSTM timesteps.
template <typename T>
VarId timestep_mask(Tape<T>& tape, std::vector<long> shape, double rate, RunMode mode, Rng* rng) {
  if (mode != RunMode::train || rate <= 0.0) return -1;
  check(rng != nullptr, "dropout: train mode needs an rng");
  Tensor<T> mask(std::move(shape));
  T keep_inv = static_cast<T>(1.0 / (1.0 - rate));
  for (long i = 0; i < mask.numel(); ++i)
    mask[i] = rng->uniform() >= rate ? keep_inv : T(0);
  return tape.constant(std::move(mask));
}

// One LSTM layer unrolled over xs; gates ordered [input, forget, cell,
// output] along the 4h axis. Initial state zero; returns every h_t.
template <typename T>
std::vector<VarId> lstm_forward(Tape<T>& tape, const std::vector<VarId>& xs, VarId wx, VarId wh,
                                VarId b, long hidden) {
  check(!xs.empty(), "lstm_forward: empty sequence");
  long B = tape.val(xs[0]).shape[0];
  VarId h = tape.constant(Tensor<T>::zeros({B, hidden}));
  VarId c = tape.constant(Tensor<T>::zeros({B, hidden}));
  std::vector<VarId> hs;
  for (VarId x : xs) {
    VarId z = tape.add_rowvec(tape.add(tape.matmul(x, wx), tape.matmul(h, wh)), b);
    VarId i_g = tape.sigmoid(tape.slice_cols(z, 0, hidden));
    VarId f_g = tape.sigmoid(tape.slice_cols(z, hidden, 2 * hidden));
    VarId g_g = tape.tanh_op(tape.slice_cols(z, 2 * hidden, 3 * hidden));
    VarId o_g = tape.sigmoid(tape.slice_cols(z, 3 * hidden, 4 * hidden));
    c = tape.add(tape.mul(f_g, c), tape.mul(i_g, g_g));
    h = tape.mul(o_g, tape.tanh_op(c));
    hs.push_back(h);
  }
  return hs;
}

// Normalized exponential weights over per-step scalar scores, then the
// convex combination of hidden states.
template <typename T>
std::pair<VarId, VarId> attention_pool(Tape<T>& tape, const std::vector<VarId>& hs, VarId w,
                                       VarId b) {
  std::vector<VarId> scores;
  for (VarId h : hs) scores.push_back(tape.add_rowvec(tape.matmul(h, w), b));
  VarId alpha = tape.softmax_rows(tape.concat_cols(scores));
  VarId v = -1;
  for (size_t t = 0; t < hs.size(); ++t) {
    VarId term = tape.rowscale(hs[t], tape.slice_cols(alpha, static_cast<long>(t),
                                                      static_cast<long>(t) + 1));
    v = (v == -1) ? term : tape.add(v, term);
  }
  return {alpha, v};
}

// Uniform pooling stand-in when attention is ablated: alpha_i = 1/n.
template <typename T>
std::pair<VarId, VarId> mean_pool(Tape<T>& tape, const std::vector<VarId>& hs) {
  long B = tape.val(hs[0]).shape[0];
  long n = static_cast<long>(hs.size());
  VarId alpha = tape.constant(Tensor<T>::full({B, n}, static_cast<T>(1.0 / (double)n)));
  VarId v = -1;
  for (VarId h : hs) v = (v == -1) ? h : tape.add(v, h);
  return {alpha, tape.scale(v, 1.0 / static_cast<double>(n))};
}

template <typename T>
VarId run_bn(Tape<T>& tape, const VarStore<T>& vs, const ParamStore<T>& ps,
             const std::string& prefix, VarId x, RunMode mode,
             std::vector<std::tuple<std::string, std::vector<T>, std::vector<T>>>* stats) {
  VarId gamma = vs.at(prefix + ".gamma");
  VarId beta = vs.at(prefix + ".beta");
  if (mode == RunMode::train) {
    auto out = tape.batchnorm_train(x, gamma, beta, kBnEps);
    if (stats) stats->push_back({prefix, out.batch_mean, out.batch_var});
    return out.y;
  }
  const auto& rm = ps.value(prefix + ".rmean").data;
  const auto& rv = ps.value(prefix + ".rvar").data;
  return tape.batchnorm_eval(x, gamma, beta, rm, rv, kBnEps);
}

}  // namespace detail

// Encoder for one column: conv/ReLU/BN/pool/dropout/flatten per window, then
// the LSTM over the n window features and the attention pool.
template <typename T>
ColumnForward<T> encode_column(Tape<T>& tape, const VarStore<T>& vs, const ParamStore<T>& ps,
                               const ModelConfig& cfg, long ci, VarId windows, long B, long n,
                               RunMode mode, Rng* rng,
                               std::vector<std::tuple<std::string, std::vector<T>, std::vector<T>>>* stats) {
  const ColumnSpec& cs = cfg.columns[static_cast<size_t>(ci)];
  std::string col = "col" + std::to_string(ci + 1);
  long flat = cfg.flatten_width(ci);

  VarId feat;  // (B*n, flat)
  if (cfg.use_cnn) {
    VarId conv = tape.relu(
        tape.conv_fullheight(windows, vs.at(col + ".enc.conv.w"), vs.at(col + ".enc.conv.b")));
    VarId bn = detail::run_bn(tape, vs, ps, col + ".enc.bn", conv, mode, stats);
    VarId pooled = tape.maxpool_w(bn, cs.pool);
    VarId dropped = detail::dropout(tape, pooled, cs.dropout, mode, rng);
    feat = tape.reshape(dropped, {B * n, flat});
  } else {
    VarId flat_in = tape.reshape(windows, {B * n, cfg.channels * cfg.window_len});
    VarId proj =
        tape.add_rowvec(tape.matmul(flat_in, vs.at(col + ".enc.proj.w")), vs.at(col + ".enc.proj.b"));
    feat = detail::dropout(tape, proj, cs.dropout, mode, rng);
  }

  // Per-timestep feature rows: window t of trial i sits at row i*n + t.
  std::vector<VarId> xs;
  for (long t = 0; t < n; ++t) {
    std::vector<long> idx(static_cast<size_t>(B));
    for (long i = 0; i < B; ++i) idx[static_cast<size_t>(i)] = i * n + t;
    xs.push_back(tape.gather_rows(feat, idx));
  }

  ColumnForward<T> out;
  out.column = ci;
  if (cfg.use_lstm) {
    VarId mask = detail::timestep_mask<T>(tape, {B, flat}, cs.enc_lstm_dropout, mode, rng);
    if (mask != -1)
      for (auto& x : xs) x = tape.mul(x, mask);
    out.h_enc = detail::lstm_forward(tape, xs, vs.at(col + ".enc.lstm.wx"),
                                     vs.at(col + ".enc.lstm.wh"), vs.at(col + ".enc.lstm.b"),
                                     cs.enc_lstm_units);
  } else {
    out.h_enc = xs;
  }

  if (cfg.use_attention) {
    auto [alpha, v] =
        detail::attention_pool(tape, out.h_enc, vs.at(col + ".enc.attn.w"), vs.at(col + ".enc.attn.b"));
    out.alpha = alpha;
    out.latent = v;
  } else {
    auto [alpha, v] = detail::mean_pool(tape, out.h_enc);
    out.alpha = alpha;
    out.latent = v;
  }
  return out;
}

// Decoder for one column: the latent repeated n times through the LSTM, each
// step reshaped, upsampled, batch-normed, 7x7-convolved, resized to C x m and
// collapsed to one channel.
template <typename T>
VarId decode_column(Tape<T>& tape, const VarStore<T>& vs, const ParamStore<T>& ps,
                    const ModelConfig& cfg, long ci, VarId latent, long B, long n, RunMode mode,
                    Rng* rng,
                    std::vector<std::tuple<std::string, std::vector<T>, std::vector<T>>>* stats) {
  const ColumnSpec& cs = cfg.columns[static_cast<size_t>(ci)];
  std::string col = "col" + std::to_string(ci + 1);

  VarId v_in = latent;
  VarId mask = detail::timestep_mask<T>(tape, tape.val(latent).shape, cs.dec_lstm_dropout, mode, rng);
  if (mask != -1) v_in = tape.mul(latent, mask);
  std::vector<VarId> xs(static_cast<size_t>(n), v_in);
  auto hs = detail::lstm_forward(tape, xs, vs.at(col + ".dec.lstm.wx"), vs.at(col + ".dec.lstm.wh"),
                                 vs.at(col + ".dec.lstm.b"), cs.dec_lstm_units);

  std::vector<VarId> maps;
  for (VarId h : hs)
    maps.push_back(tape.reshape(h, {B, 1, cs.dec_reshape_rows, cs.dec_reshape_cols}));
  VarId grid = tape.concat_rows(maps);  // (n*B, 1, R, Cw), step-major
  grid = tape.upsample_nearest(grid, cfg.upsample_rows, 4);
  grid = detail::run_bn(tape, vs, ps, col + ".dec.bn1", grid, mode, stats);
  grid = tape.relu(tape.conv2d_same(grid, vs.at(col + ".dec.conv7.w"), vs.at(col + ".dec.conv7.b")));
  grid = detail::run_bn(tape, vs, ps, col + ".dec.bn2", grid, mode, stats);
  grid = tape.resize_bilinear(grid, cfg.channels, cfg.window_len);
  grid = tape.conv2d_same(grid, vs.at(col + ".dec.conv1.w"), vs.at(col + ".dec.conv1.b"));

  // Reorder step-major rows to trial-major so row i*n+t matches window t of
  // trial i in the input tensor.
  std::vector<long> perm(static_cast<size_t>(B * n));
  for (long i = 0; i < B; ++i)
    for (long t = 0; t < n; ++t) perm[static_cast<size_t>(i * n + t)] = t * B + i;
  grid = tape.gather_rows(grid, perm);
  return tape.reshape(grid, {B * n, cfg.channels, cfg.window_len});
}

// Classifier head: two fully connected layers; the 128-d fc1 output is the
// center-loss embedding, fc2 produces logits. The fc2 weight L2 penalty is
// returned as its own scalar term.
template <typename T>
void classify(Tape<T>& tape, const VarStore<T>& vs, const ModelConfig& cfg, ForwardResult<T>& fr) {
  VarId fc1 = tape.relu(
      tape.add_rowvec(tape.matmul(fr.latent_concat, vs.at("clf.fc1.w")), vs.at("clf.fc1.b")));
  fr.features = fc1;
  fr.logits = tape.add_rowvec(tape.matmul(fc1, vs.at("clf.fc2.w")), vs.at("clf.fc2.b"));
  fr.probs = tape.softmax_rows(fr.logits);
  VarId w2 = vs.at("clf.fc2.w");
  fr.l2_penalty = tape.scale(tape.sum_all(tape.mul(w2, w2)), cfg.l2_factor);
}

template <typename T>
ForwardResult<T> forward(Tape<T>& tape, const VarStore<T>& vs, const ParamStore<T>& ps,
                         const ModelConfig& cfg, const Batch<T>& batch, RunMode mode,
                         Rng* rng = nullptr, bool with_decoder = true) {
  ForwardResult<T> fr;
  fr.B = batch.B;
  fr.n = batch.n;
  VarId windows = tape.constant(batch.windows);
  std::vector<VarId> latents;
  for (long ci : cfg.active_columns()) {
    ColumnForward<T> colf = encode_column(tape, vs, ps, cfg, ci, windows, batch.B, batch.n, mode,
                                          rng, &fr.bn_stats);
    if (with_decoder)
      colf.recon = decode_column(tape, vs, ps, cfg, ci, colf.latent, batch.B, batch.n, mode, rng,
                                 &fr.bn_stats);
    latents.push_back(colf.latent);
    fr.columns.push_back(std::move(colf));
  }
  fr.latent_concat = latents.size() == 1 ? latents[0] : tape.concat_cols(latents);
  classify(tape, vs, cfg, fr);
  return fr;
}

// Eval-mode class predictions (argmax of the softmax), in trial order.
template <typename T>
std::vector<int> predict(const ParamStore<T>& ps, const ModelConfig& cfg,
                         const std::vector<const Trial*>& trials, long chunk = 64) {
  std::vector<int> preds;
  for (size_t off = 0; off < trials.size(); off += static_cast<size_t>(chunk)) {
    std::vector<const Trial*> part;
    for (size_t i = off; i < std::min(trials.size(), off + static_cast<size_t>(chunk)); ++i)
      part.push_back(trials[i]);
    Batch<T> b = make_batch<T>(part, cfg, nullptr);
    Tape<T> tape;
    VarStore<T> vs = register_params(tape, ps, false);
    ForwardResult<T> fr = forward(tape, vs, ps, cfg, b, RunMode::eval, nullptr, false);
    const auto& probs = tape.val(fr.probs);
    for (long i = 0; i < b.B; ++i) {
      int arg = 0;
      for (long k = 1; k < probs.shape[1]; ++k)
        if (probs.at(i, k) > probs.at(i, arg)) arg = static_cast<int>(k);
      preds.push_back(arg);
    }
  }
  return preds;
}

// Applies the momentum update to every BN running stat recorded by a
// train-mode forward.
template <typename T>
void update_bn_running_stats(ParamStore<T>& ps, const ForwardResult<T>& fr,
                             double momentum = kBnMomentum) {
  for (const auto& [prefix, mean, var] : fr.bn_stats) {
    auto& rm = ps.value(prefix + ".rmean");
    auto& rv = ps.value(prefix + ".rvar");
    for (long i = 0; i < rm.numel(); ++i) {
      rm[i] = static_cast<T>(momentum * rm[i] + (1.0 - momentum) * mean[static_cast<size_t>(i)]);
      rv[i] = static_cast<T>(momentum * rv[i] + (1.0 - momentum) * var[static_cast<size_t>(i)]);
    }
  }
}

// ============================================================================
// Checkpoint container
// ============================================================================

// "SSCK" v1: config text, then each parameter as (path, trainable flag,
// shape, float32 little-endian data) in store order.
void save_checkpoint(const ParamStore<float>& ps, const RunConfig& cfg, const std::string& path);
std::pair<ParamStore<float>, RunConfig> load_checkpoint(const std::string& path);

}  // namespace ssda
