#include "seqchoice/deep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "seqchoice/evaluation.hpp"
#include "seqchoice/models.hpp"
#include "seqchoice/rng.hpp"

namespace seqchoice {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

void check_classes_present(const std::vector<int>& y) {
  bool h0 = false, h1 = false;
  for (int v : y) {
    h0 = h0 || v == 0;
    h1 = h1 || v == 1;
  }
  if (!h0 || !h1) fail(Errc::SingleClass, "training labels contain a single class");
}

void he_init(Mat& W, Rng& rng) {
  double sd = std::sqrt(2.0 / static_cast<double>(W.cols));
  for (auto& v : W.a) v = rng.normal(0.0, sd);
}

void collect_mat(Mat& m, std::vector<double*>& out) {
  for (auto& v : m.a) out.push_back(&v);
}

void collect_vec(Vec& v, std::vector<double*>& out) {
  for (auto& x : v) out.push_back(&x);
}

// Nesterov update with an explicit lookahead evaluation: the caller shifts
// params by momentum*velocity, computes gradients there, restores, then calls
// this to apply v <- mu*v - lr*g; theta <- theta + v.
void nesterov_apply(const std::vector<double*>& params, Vec& velocity,
                    const std::vector<double*>& grads, double lr, double momentum) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * *grads[i];
    *params[i] += velocity[i];
  }
}

struct LookaheadGuard {
  const std::vector<double*>& params;
  Vec saved;
  LookaheadGuard(const std::vector<double*>& p, const Vec& velocity, double momentum) : params(p) {
    saved.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      saved[i] = *p[i];
      *p[i] += momentum * velocity[i];
    }
  }
  ~LookaheadGuard() {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// MLP.

void MLPConfig::validate() const {
  if (hidden_sizes.empty()) fail(Errc::InvalidConfig, "hidden_sizes must be non-empty");
  for (int h : hidden_sizes) {
    if (h < 1) fail(Errc::InvalidConfig, "hidden size must be >= 1");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    fail(Errc::InvalidConfig, "dropout_p must be in [0, 1)");
  }
  if (batch_size < 1 || epochs < 0) fail(Errc::InvalidConfig, "bad batch_size/epochs");
  if (!(learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    fail(Errc::InvalidConfig, "bad learning_rate/momentum");
  }
}

double elu(double x, double alpha) { return x > 0 ? x : alpha * std::expm1(x); }

namespace {

struct MLPLayerTape {
  Mat in;      // layer input
  Mat z;       // affine output
  Mat xhat;    // normalized (batchnorm)
  Vec mean, var;
  Mat act_in;  // what went into ELU (z or bn output)
  Mat mask;    // dropout mask with inverted scaling, empty if unused
  Mat out;
};

struct MLPTape {
  std::vector<MLPLayerTape> layers;
  Vec final_act_row_major;  // last hidden activations, B x h
  Vec probs;
};

Vec mlp_forward_tape(MLPModel& m, const Mat& batch, RunMode mode, std::uint64_t mask_seed,
                     MLPTape* tape) {
  if (batch.cols != static_cast<std::size_t>(m.input_dim)) {
    fail(Errc::ShapeMismatch, "batch has " + std::to_string(batch.cols) + " columns, model wants " +
                                  std::to_string(m.input_dim));
  }
  if (mode == RunMode::Train && m.cfg.batchnorm && batch.rows < 2) {
    fail(Errc::BatchTooSmall, "batch-norm training statistics need >= 2 rows");
  }
  const std::size_t B = batch.rows;
  Rng drop_rng(derive_seed(mask_seed, "mlp.dropout"));
  Mat a = batch;
  if (tape) tape->layers.resize(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    MLPLayer& layer = m.layers[l];
    const std::size_t h = layer.W.rows;
    Mat z(B, h);
    for (std::size_t r = 0; r < B; ++r) affine(layer.W, a.row(r), layer.b, z.row(r));

    Mat act_in = z;
    Vec mean, var;
    Mat xhat;
    if (m.cfg.batchnorm) {
      if (mode == RunMode::Train) {
        mean.assign(h, 0.0);
        var.assign(h, 0.0);
        for (std::size_t r = 0; r < B; ++r) {
          for (std::size_t c = 0; c < h; ++c) mean[c] += z(r, c);
        }
        for (auto& v : mean) v /= static_cast<double>(B);
        for (std::size_t r = 0; r < B; ++r) {
          for (std::size_t c = 0; c < h; ++c) {
            double d = z(r, c) - mean[c];
            var[c] += d * d;
          }
        }
        for (auto& v : var) v /= static_cast<double>(B);
        for (std::size_t c = 0; c < h; ++c) {
          layer.bn.run_mean[c] = kBnMomentum * layer.bn.run_mean[c] + (1 - kBnMomentum) * mean[c];
          layer.bn.run_var[c] = kBnMomentum * layer.bn.run_var[c] + (1 - kBnMomentum) * var[c];
        }
      } else {
        mean = layer.bn.run_mean;
        var = layer.bn.run_var;
      }
      xhat = Mat(B, h);
      for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t c = 0; c < h; ++c) {
          double xh = (z(r, c) - mean[c]) / std::sqrt(var[c] + kBnEps);
          xhat(r, c) = xh;
          act_in(r, c) = layer.bn.gamma[c] * xh + layer.bn.beta[c];
        }
      }
    }

    Mat out(B, h);
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < h; ++c) out(r, c) = elu(act_in(r, c), m.cfg.elu_alpha);
    }

    Mat mask;
    if (mode == RunMode::Train && m.cfg.dropout_p > 0.0) {
      const double keep = 1.0 - m.cfg.dropout_p;
      mask = Mat(B, h);
      for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t c = 0; c < h; ++c) {
          mask(r, c) = drop_rng.bernoulli(keep) ? 1.0 / keep : 0.0;
          out(r, c) *= mask(r, c);
        }
      }
    }

    if (tape) {
      auto& t = tape->layers[l];
      t.in = a;
      t.z = std::move(z);
      t.xhat = std::move(xhat);
      t.mean = std::move(mean);
      t.var = std::move(var);
      t.act_in = std::move(act_in);
      t.mask = std::move(mask);
      t.out = out;
    }
    a = std::move(out);
  }

  Vec probs(B);
  for (std::size_t r = 0; r < B; ++r) probs[r] = sigmoid(dot(a.row(r), m.w_out) + m.b_out);
  if (tape) {
    tape->final_act_row_major = a.a;
    tape->probs = probs;
  }
  return probs;
}

// Mean binary cross-entropy over the batch; returns loss and fills a gradient
// model of identical shape.
double mlp_loss_and_grad(MLPModel& m, const Mat& X, const std::vector<int>& y,
                         std::uint64_t mask_seed, MLPModel& grads) {
  MLPTape tape;
  Vec probs = mlp_forward_tape(m, X, RunMode::Train, mask_seed, &tape);
  const std::size_t B = X.rows;
  double loss = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    double p = std::clamp(probs[r], 1e-12, 1.0 - 1e-12);
    loss -= y[r] ? std::log(p) : std::log(1.0 - p);
  }
  loss /= static_cast<double>(B);

  // dlogit per row.
  Vec dlogit(B);
  for (std::size_t r = 0; r < B; ++r) dlogit[r] = (probs[r] - y[r]) / static_cast<double>(B);

  const std::size_t hlast = m.layers.back().W.rows;
  Mat da(B, hlast);
  std::fill(grads.w_out.begin(), grads.w_out.end(), 0.0);
  grads.b_out = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    const double g = dlogit[r];
    const double* act = tape.final_act_row_major.data() + r * hlast;
    for (std::size_t c = 0; c < hlast; ++c) {
      grads.w_out[c] += g * act[c];
      da(r, c) = g * m.w_out[c];
    }
    grads.b_out += g;
  }

  for (std::size_t li = m.layers.size(); li-- > 0;) {
    MLPLayer& layer = m.layers[li];
    MLPLayer& glayer = grads.layers[li];
    const MLPLayerTape& t = tape.layers[li];
    const std::size_t h = layer.W.rows;

    // Dropout.
    if (!t.mask.a.empty()) {
      for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t c = 0; c < h; ++c) da(r, c) *= t.mask(r, c);
      }
    }
    // ELU.
    Mat dz(B, h);
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < h; ++c) {
        double x = t.act_in(r, c);
        double deriv = x > 0 ? 1.0 : m.cfg.elu_alpha * std::exp(x);
        dz(r, c) = da(r, c) * deriv;
      }
    }
    // Batch norm.
    if (m.cfg.batchnorm) {
      std::fill(glayer.bn.gamma.begin(), glayer.bn.gamma.end(), 0.0);
      std::fill(glayer.bn.beta.begin(), glayer.bn.beta.end(), 0.0);
      Mat dxhat(B, h);
      for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t c = 0; c < h; ++c) {
          glayer.bn.gamma[c] += dz(r, c) * t.xhat(r, c);
          glayer.bn.beta[c] += dz(r, c);
          dxhat(r, c) = dz(r, c) * layer.bn.gamma[c];
        }
      }
      for (std::size_t c = 0; c < h; ++c) {
        const double inv_sd = 1.0 / std::sqrt(t.var[c] + kBnEps);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t r = 0; r < B; ++r) {
          sum_dxhat += dxhat(r, c);
          sum_dxhat_xhat += dxhat(r, c) * t.xhat(r, c);
        }
        for (std::size_t r = 0; r < B; ++r) {
          dz(r, c) = inv_sd / static_cast<double>(B) *
                     (static_cast<double>(B) * dxhat(r, c) - sum_dxhat -
                      t.xhat(r, c) * sum_dxhat_xhat);
        }
      }
    }
    // Affine.
    std::fill(glayer.W.a.begin(), glayer.W.a.end(), 0.0);
    std::fill(glayer.b.begin(), glayer.b.end(), 0.0);
    const std::size_t in_dim = layer.W.cols;
    Mat din(B, in_dim);
    for (std::size_t r = 0; r < B; ++r) {
      accum_outer(glayer.W, dz.row(r), t.in.row(r));
      for (std::size_t c = 0; c < h; ++c) glayer.b[c] += dz(r, c);
      matT_vec(layer.W, dz.row(r), din.row(r));
    }
    da = std::move(din);
  }
  return loss;
}

MLPModel make_mlp(int input_dim, const MLPConfig& cfg, Rng& rng) {
  MLPModel m;
  m.cfg = cfg;
  m.input_dim = input_dim;
  int in = input_dim;
  for (int h : cfg.hidden_sizes) {
    MLPLayer layer;
    layer.W = Mat(h, in);
    he_init(layer.W, rng);
    layer.b.assign(h, 0.0);
    layer.bn.gamma.assign(h, 1.0);
    layer.bn.beta.assign(h, 0.0);
    layer.bn.run_mean.assign(h, 0.0);
    layer.bn.run_var.assign(h, 1.0);
    m.layers.push_back(std::move(layer));
    in = h;
  }
  m.w_out.assign(in, 0.0);
  double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (auto& v : m.w_out) v = rng.normal(0.0, sd);
  m.b_out = 0.0;
  return m;
}

MLPModel zeros_like(const MLPModel& m) {
  MLPModel g = m;
  for (auto& layer : g.layers) {
    std::fill(layer.W.a.begin(), layer.W.a.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
    std::fill(layer.bn.gamma.begin(), layer.bn.gamma.end(), 0.0);
    std::fill(layer.bn.beta.begin(), layer.bn.beta.end(), 0.0);
  }
  std::fill(g.w_out.begin(), g.w_out.end(), 0.0);
  g.b_out = 0.0;
  return g;
}

}  // namespace

Vec mlp_forward(const MLPModel& m, const Mat& batch, RunMode mode, std::uint64_t mask_seed) {
  MLPModel& mutable_m = const_cast<MLPModel&>(m);
  if (mode == RunMode::Infer) {
    // Running statistics are read, not written, in infer mode.
    return mlp_forward_tape(mutable_m, batch, RunMode::Infer, mask_seed, nullptr);
  }
  return mlp_forward_tape(mutable_m, batch, RunMode::Train, mask_seed, nullptr);
}

double mlp_predict(const MLPModel& m, std::span<const double> x) {
  Mat b(1, x.size());
  std::copy(x.begin(), x.end(), b.a.begin());
  return mlp_forward(m, b, RunMode::Infer)[0];
}

std::vector<double*> collect_params(MLPModel& m) {
  std::vector<double*> out;
  for (auto& layer : m.layers) {
    collect_mat(layer.W, out);
    collect_vec(layer.b, out);
    collect_vec(layer.bn.gamma, out);
    collect_vec(layer.bn.beta, out);
  }
  collect_vec(m.w_out, out);
  out.push_back(&m.b_out);
  return out;
}

std::pair<MLPModel, TrainReport> mlp_train(const Mat& X, const std::vector<int>& y,
                                           const MLPConfig& cfg) {
  cfg.validate();
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "mlp_train");
  check_classes_present(y);
  Rng rng(derive_seed(cfg.seed, "mlp.init"));
  MLPModel model = make_mlp(static_cast<int>(X.cols), cfg, rng);
  MLPModel grads = zeros_like(model);
  auto params = collect_params(model);
  auto gptrs = collect_params(grads);
  Vec velocity(params.size(), 0.0);

  TrainReport report;
  std::vector<std::size_t> order(X.rows);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "mlp.shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b0 = 0; b0 < X.rows; b0 += cfg.batch_size) {
      std::size_t b1 = std::min(X.rows, b0 + cfg.batch_size);
      if (cfg.batchnorm && b1 - b0 < 2) continue;  // final 1-row remainder
      Mat Xb(b1 - b0, X.cols);
      std::vector<int> yb(b1 - b0);
      for (std::size_t i = b0; i < b1; ++i) {
        std::size_t src = order[i];
        for (std::size_t c = 0; c < X.cols; ++c) Xb(i - b0, c) = X(src, c);
        yb[i - b0] = y[src];
      }
      std::uint64_t mask_seed = derive_seed(
          cfg.seed, "mlp.batch", (static_cast<std::uint64_t>(epoch) << 32) | n_batches);
      double loss;
      {
        LookaheadGuard guard(params, velocity, cfg.momentum);
        loss = mlp_loss_and_grad(model, Xb, yb, mask_seed, grads);
      }
      if (std::isnan(loss)) fail(Errc::Diverged, "training loss is NaN");
      nesterov_apply(params, velocity, gptrs, cfg.learning_rate, cfg.momentum);
      epoch_loss += loss;
      ++n_batches;
    }
    EpochStat st;
    st.train_loss = n_batches ? epoch_loss / static_cast<double>(n_batches) : 0.0;
    st.val_auc = std::numeric_limits<double>::quiet_NaN();
    st.lr = cfg.learning_rate;
    report.epochs.push_back(st);
  }
  report.stop_reason = cfg.learning_rate == 0.0 ? "no-op: zero learning rate" : "max-epochs";
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// LSTM cell.

LSTMCellParams make_lstm_cell(int input_size, int hidden_size) {
  LSTMCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  auto init = [&](Mat& m, std::size_t r, std::size_t c) { m = Mat(r, c); };
  std::size_t h = hidden_size, d = input_size;
  init(p.W_xi, h, d);
  init(p.W_hi, h, h);
  p.b_i.assign(h, 0.0);
  init(p.W_xf, h, d);
  init(p.W_hf, h, h);
  p.b_f.assign(h, 0.0);
  init(p.W_xo, h, d);
  init(p.W_ho, h, h);
  p.b_o.assign(h, 0.0);
  init(p.W_xj, h, d);
  init(p.W_hj, h, h);
  p.b_j.assign(h, 0.0);
  return p;
}

LSTMState lstm_cell_step(const LSTMCellParams& p, std::span<const double> x,
                         const LSTMState& prev, InputTransform variant, LSTMStepTape* tape) {
  const std::size_t h = static_cast<std::size_t>(p.hidden_size);
  if (x.size() != static_cast<std::size_t>(p.input_size) || prev.h.size() != h ||
      prev.c.size() != h) {
    fail(Errc::ShapeMismatch, "lstm_cell_step");
  }
  Vec zi(h), zf(h), zo(h), zj(h);
  affine(p.W_xi, x, p.b_i, zi);
  affine(p.W_xf, x, p.b_f, zf);
  affine(p.W_xo, x, p.b_o, zo);
  affine(p.W_xj, x, p.b_j, zj);
  for (std::size_t k = 0; k < h; ++k) {
    zi[k] += dot(p.W_hi.row(k), prev.h);
    zf[k] += dot(p.W_hf.row(k), prev.h);
    zo[k] += dot(p.W_ho.row(k), prev.h);
    zj[k] += dot(p.W_hj.row(k), prev.h);
  }
  LSTMState st;
  st.h.resize(h);
  st.c.resize(h);
  Vec gi(h), gf(h), go(h), gj(h), tc(h);
  for (std::size_t k = 0; k < h; ++k) {
    gi[k] = sigmoid(zi[k]);
    gf[k] = sigmoid(zf[k]);
    go[k] = sigmoid(zo[k]);
    gj[k] = variant == InputTransform::SigmoidPerPaper ? sigmoid(zj[k]) : std::tanh(zj[k]);
    st.c[k] = gf[k] * prev.c[k] + gi[k] * gj[k];
    tc[k] = std::tanh(st.c[k]);
    st.h[k] = tc[k] * go[k];
  }
  if (tape) {
    tape->i = std::move(gi);
    tape->f = std::move(gf);
    tape->o = std::move(go);
    tape->j = std::move(gj);
    tape->c = st.c;
    tape->h = st.h;
    tape->tanh_c = std::move(tc);
  }
  return st;
}

std::vector<double*> collect_params(LSTMCellParams& p) {
  std::vector<double*> out;
  collect_mat(p.W_xi, out);
  collect_mat(p.W_hi, out);
  collect_vec(p.b_i, out);
  collect_mat(p.W_xf, out);
  collect_mat(p.W_hf, out);
  collect_vec(p.b_f, out);
  collect_mat(p.W_xo, out);
  collect_mat(p.W_ho, out);
  collect_vec(p.b_o, out);
  collect_mat(p.W_xj, out);
  collect_mat(p.W_hj, out);
  collect_vec(p.b_j, out);
  return out;
}

namespace {

LSTMCellParams lstm_zeros_like(const LSTMCellParams& p) {
  LSTMCellParams g = make_lstm_cell(p.input_size, p.hidden_size);
  return g;
}

// One step of backpropagation through the cell. dh/dc are the gradients
// arriving at this step's outputs; on return dh_prev/dc_prev hold the
// gradients for the previous state and dx the input gradient.
void lstm_cell_backward(const LSTMCellParams& p, InputTransform variant,
                        std::span<const double> x, const LSTMState& prev,
                        const LSTMStepTape& t, const Vec& dh, const Vec& dc_in,
                        LSTMCellParams& g, Vec& dx, Vec& dh_prev, Vec& dc_prev) {
  const std::size_t h = static_cast<std::size_t>(p.hidden_size);
  Vec dzi(h), dzf(h), dzo(h), dzj(h);
  dc_prev.assign(h, 0.0);
  for (std::size_t k = 0; k < h; ++k) {
    double do_ = dh[k] * t.tanh_c[k];
    double dc = dc_in[k] + dh[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
    double di = dc * t.j[k];
    double dj = dc * t.i[k];
    double df = dc * prev.c[k];
    dc_prev[k] = dc * t.f[k];
    dzi[k] = di * t.i[k] * (1.0 - t.i[k]);
    dzf[k] = df * t.f[k] * (1.0 - t.f[k]);
    dzo[k] = do_ * t.o[k] * (1.0 - t.o[k]);
    dzj[k] = variant == InputTransform::SigmoidPerPaper ? dj * t.j[k] * (1.0 - t.j[k])
                                                        : dj * (1.0 - t.j[k] * t.j[k]);
  }
  accum_outer(g.W_xi, dzi, x);
  accum_outer(g.W_xf, dzf, x);
  accum_outer(g.W_xo, dzo, x);
  accum_outer(g.W_xj, dzj, x);
  accum_outer(g.W_hi, dzi, prev.h);
  accum_outer(g.W_hf, dzf, prev.h);
  accum_outer(g.W_ho, dzo, prev.h);
  accum_outer(g.W_hj, dzj, prev.h);
  for (std::size_t k = 0; k < h; ++k) {
    g.b_i[k] += dzi[k];
    g.b_f[k] += dzf[k];
    g.b_o[k] += dzo[k];
    g.b_j[k] += dzj[k];
  }
  dx.assign(x.size(), 0.0);
  dh_prev.assign(h, 0.0);
  Vec tmp(x.size());
  auto add_T = [&](const Mat& W, const Vec& dz, Vec& acc) {
    for (std::size_t r = 0; r < W.rows; ++r) {
      const double g2 = dz[r];
      auto wr = W.row(r);
      for (std::size_t c = 0; c < W.cols; ++c) acc[c] += wr[c] * g2;
    }
  };
  add_T(p.W_xi, dzi, dx);
  add_T(p.W_xf, dzf, dx);
  add_T(p.W_xo, dzo, dx);
  add_T(p.W_xj, dzj, dx);
  add_T(p.W_hi, dzi, dh_prev);
  add_T(p.W_hf, dzf, dh_prev);
  add_T(p.W_ho, dzo, dh_prev);
  add_T(p.W_hj, dzj, dh_prev);
}

}  // namespace

// ---------------------------------------------------------------------------
// Bidirectional stacked LSTM classifier.

void BiRNNConfig::validate() const {
  if (n_layers < 1 || hidden_size < 1 || window < 1 || batch_size < 1) {
    fail(Errc::InvalidConfig, "bad BiRNN sizes");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail(Errc::InvalidConfig, "dropout_p in [0,1)");
  if (patience < 1) fail(Errc::InvalidConfig, "patience must be >= 1");
  if (max_epochs < 1) fail(Errc::InvalidConfig, "max_epochs must be >= 1");
  if (!(lr0 >= 0.0) || !(lr_decay > 0.0 && lr_decay <= 1.0)) {
    fail(Errc::InvalidConfig, "bad learning-rate schedule");
  }
}

std::vector<double*> collect_params(BiRNNModel& m) {
  std::vector<double*> out;
  for (auto& c : m.fwd) {
    auto p = collect_params(c);
    out.insert(out.end(), p.begin(), p.end());
  }
  for (auto& c : m.bwd) {
    auto p = collect_params(c);
    out.insert(out.end(), p.begin(), p.end());
  }
  collect_mat(m.W_fc, out);
  collect_vec(m.b_fc, out);
  return out;
}

namespace {

BiRNNModel make_birnn(int input_dim, const BiRNNConfig& cfg, Rng& rng) {
  BiRNNModel m;
  m.cfg = cfg;
  m.input_dim = input_dim;
  int in = input_dim;
  for (int l = 0; l < cfg.n_layers; ++l) {
    m.fwd.push_back(make_lstm_cell(in, cfg.hidden_size));
    m.bwd.push_back(make_lstm_cell(in, cfg.hidden_size));
    in = 2 * cfg.hidden_size;
  }
  m.W_fc = Mat(2, 2 * cfg.hidden_size);
  m.b_fc.assign(2, 0.0);
  for (auto* cells : {&m.fwd, &m.bwd}) {
    for (auto& c : *cells) {
      for (Mat* w : {&c.W_xi, &c.W_hi, &c.W_xf, &c.W_hf, &c.W_xo, &c.W_ho, &c.W_xj, &c.W_hj}) {
        he_init(*w, rng);
      }
    }
  }
  he_init(m.W_fc, rng);
  return m;
}

BiRNNModel birnn_zeros_like(const BiRNNModel& m) {
  BiRNNModel g;
  g.cfg = m.cfg;
  g.input_dim = m.input_dim;
  for (const auto& c : m.fwd) g.fwd.push_back(lstm_zeros_like(c));
  for (const auto& c : m.bwd) g.bwd.push_back(lstm_zeros_like(c));
  g.W_fc = Mat(m.W_fc.rows, m.W_fc.cols);
  g.b_fc.assign(m.b_fc.size(), 0.0);
  return g;
}

struct BiLayerTape {
  std::vector<Vec> in;                  // N input vectors
  std::vector<LSTMStepTape> ftape, btape;
  std::vector<LSTMState> fstate, bstate;  // state after processing position t
  std::vector<Vec> out;                 // N concatenated (and dropped-out) outputs
  std::vector<Vec> mask;                // dropout masks, empty when unused
};

struct WindowTape {
  std::vector<BiLayerTape> layers;
  Vec logits;   // 2
  Vec probs;    // softmax
};

// Forward over one window; rows(t) must yield the t-th input row.
template <class RowFn>
double birnn_forward_window(const BiRNNModel& m, RowFn rows, int N, int label, RunMode mode,
                            std::uint64_t mask_seed, WindowTape* tape) {
  const int L = static_cast<int>(m.fwd.size());
  const std::size_t H = static_cast<std::size_t>(m.cfg.hidden_size);
  Rng drop_rng(derive_seed(mask_seed, "birnn.dropout"));
  std::vector<Vec> layer_in(N);
  for (int t = 0; t < N; ++t) {
    auto r = rows(t);
    layer_in[t].assign(r.begin(), r.end());
  }
  if (tape) tape->layers.resize(L);
  for (int l = 0; l < L; ++l) {
    BiLayerTape lt;
    lt.in = layer_in;
    lt.ftape.resize(N);
    lt.btape.resize(N);
    lt.fstate.resize(N);
    lt.bstate.resize(N);
    LSTMState st{Vec(H, 0.0), Vec(H, 0.0)};
    for (int t = 0; t < N; ++t) {
      st = lstm_cell_step(m.fwd[l], lt.in[t], st, m.cfg.input_transform, &lt.ftape[t]);
      lt.fstate[t] = st;
    }
    st = LSTMState{Vec(H, 0.0), Vec(H, 0.0)};
    for (int t = N - 1; t >= 0; --t) {
      st = lstm_cell_step(m.bwd[l], lt.in[t], st, m.cfg.input_transform, &lt.btape[t]);
      lt.bstate[t] = st;
    }
    lt.out.resize(N);
    bool dropped = mode == RunMode::Train && m.cfg.dropout_p > 0.0 && l < L - 1;
    if (dropped) lt.mask.resize(N);
    const double keep = 1.0 - m.cfg.dropout_p;
    for (int t = 0; t < N; ++t) {
      Vec& o = lt.out[t];
      o.resize(2 * H);
      std::copy(lt.fstate[t].h.begin(), lt.fstate[t].h.end(), o.begin());
      std::copy(lt.bstate[t].h.begin(), lt.bstate[t].h.end(), o.begin() + H);
      if (dropped) {
        lt.mask[t].resize(2 * H);
        for (std::size_t k = 0; k < 2 * H; ++k) {
          lt.mask[t][k] = drop_rng.bernoulli(keep) ? 1.0 / keep : 0.0;
          o[k] *= lt.mask[t][k];
        }
      }
    }
    layer_in = lt.out;
    if (tape) (*tape).layers[l] = std::move(lt);
  }
  // Forward/backward states at the final time step feed the dense layer.
  const Vec& u = layer_in[N - 1];
  Vec logits(2);
  affine(m.W_fc, u, m.b_fc, logits);
  double mx = std::max(logits[0], logits[1]);
  double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
  Vec probs{e0 / (e0 + e1), e1 / (e0 + e1)};
  double loss = label >= 0 ? -std::log(std::max(probs[label], 1e-300)) : 0.0;
  if (tape) {
    tape->logits = std::move(logits);
    tape->probs = std::move(probs);
  }
  return loss;
}

// Backward for one window; accumulates into g.
void birnn_backward_window(const BiRNNModel& m, const WindowTape& tape, int N, int label,
                           double scale, BiRNNModel& g) {
  const int L = static_cast<int>(m.fwd.size());
  const std::size_t H = static_cast<std::size_t>(m.cfg.hidden_size);
  Vec dlogits = tape.probs;
  dlogits[label] -= 1.0;
  for (auto& v : dlogits) v *= scale;

  const Vec& u = tape.layers[L - 1].out[N - 1];
  accum_outer(g.W_fc, dlogits, u);
  for (std::size_t k = 0; k < 2; ++k) g.b_fc[k] += dlogits[k];
  std::vector<Vec> dout(N, Vec(2 * H, 0.0));
  matT_vec(m.W_fc, dlogits, dout[N - 1]);

  for (int l = L - 1; l >= 0; --l) {
    const BiLayerTape& lt = tape.layers[l];
    if (!lt.mask.empty()) {
      for (int t = 0; t < N; ++t) {
        for (std::size_t k = 0; k < 2 * H; ++k) dout[t][k] *= lt.mask[t][k];
      }
    }
    std::vector<Vec> din(N, Vec(lt.in[0].size(), 0.0));
    // Forward chain: gradient flows from t = N-1 down to 0.
    {
      Vec dh_carry(H, 0.0), dc_carry(H, 0.0), dx, dh_prev, dc_prev;
      LSTMState zero{Vec(H, 0.0), Vec(H, 0.0)};
      for (int t = N - 1; t >= 0; --t) {
        Vec dh(H);
        for (std::size_t k = 0; k < H; ++k) dh[k] = dout[t][k] + dh_carry[k];
        const LSTMState& prev = t > 0 ? lt.fstate[t - 1] : zero;
        lstm_cell_backward(m.fwd[l], m.cfg.input_transform, lt.in[t], prev, lt.ftape[t], dh,
                           dc_carry, g.fwd[l], dx, dh_prev, dc_prev);
        for (std::size_t k = 0; k < din[t].size(); ++k) din[t][k] += dx[k];
        dh_carry = std::move(dh_prev);
        dc_carry = std::move(dc_prev);
      }
    }
    // Backward chain: computed from t = N-1 downward, so gradient flows upward.
    {
      Vec dh_carry(H, 0.0), dc_carry(H, 0.0), dx, dh_prev, dc_prev;
      LSTMState zero{Vec(H, 0.0), Vec(H, 0.0)};
      for (int t = 0; t < N; ++t) {
        Vec dh(H);
        for (std::size_t k = 0; k < H; ++k) dh[k] = dout[t][H + k] + dh_carry[k];
        const LSTMState& prev = t < N - 1 ? lt.bstate[t + 1] : zero;
        lstm_cell_backward(m.bwd[l], m.cfg.input_transform, lt.in[t], prev, lt.btape[t], dh,
                           dc_carry, g.bwd[l], dx, dh_prev, dc_prev);
        for (std::size_t k = 0; k < din[t].size(); ++k) din[t][k] += dx[k];
        dh_carry = std::move(dh_prev);
        dc_carry = std::move(dc_prev);
      }
    }
    dout = std::move(din);
  }
}

double birnn_window_loss_and_grad(const BiRNNModel& m, const WindowedTensor& wt, std::size_t w,
                                  std::uint64_t mask_seed, double scale, BiRNNModel& g) {
  WindowTape tape;
  double loss = birnn_forward_window(
      m, [&](int t) { return wt.step(w, t); }, wt.window_len, wt.window_label[w], RunMode::Train,
      mask_seed, &tape);
  birnn_backward_window(m, tape, wt.window_len, wt.window_label[w], scale, g);
  return loss;
}

void birnn_clear_grads(BiRNNModel& g) {
  auto ptrs = collect_params(g);
  for (auto* p : ptrs) *p = 0.0;
}

}  // namespace

double birnn_predict(const BiRNNModel& m, const Mat& window) {
  if (window.rows != static_cast<std::size_t>(m.cfg.window) ||
      window.cols != static_cast<std::size_t>(m.input_dim)) {
    fail(Errc::WrongWindowLength, "window is " + std::to_string(window.rows) + "x" +
                                      std::to_string(window.cols) + ", model wants " +
                                      std::to_string(m.cfg.window) + "x" +
                                      std::to_string(m.input_dim));
  }
  WindowTape tape;
  birnn_forward_window(
      m, [&](int t) { return window.row(t); }, static_cast<int>(window.rows), -1, RunMode::Infer,
      0, &tape);
  return tape.probs[1];
}

double birnn_predict(const BiRNNModel& m, const WindowedTensor& wt, std::size_t w) {
  if (wt.window_len != m.cfg.window || wt.dim() != static_cast<std::size_t>(m.input_dim)) {
    fail(Errc::WrongWindowLength, "tensor window mismatch");
  }
  WindowTape tape;
  birnn_forward_window(
      m, [&](int t) { return wt.step(w, t); }, wt.window_len, -1, RunMode::Infer, 0, &tape);
  return tape.probs[1];
}

Vec birnn_predict_all(const BiRNNModel& m, const WindowedTensor& wt) {
  Vec out(wt.count());
  for (std::size_t w = 0; w < wt.count(); ++w) out[w] = birnn_predict(m, wt, w);
  return out;
}

std::pair<BiRNNModel, TrainReport> birnn_train(const WindowedTensor& train,
                                               const WindowedTensor& validation,
                                               const BiRNNConfig& cfg_in) {
  BiRNNConfig cfg = cfg_in;
  cfg.validate();
  if (train.count() == 0) fail(Errc::EmptyDataset, "no training windows");
  if (validation.count() == 0) fail(Errc::EmptyValidation, "no validation windows");
  if (train.dim() != validation.dim() || train.window_len != validation.window_len) {
    fail(Errc::ShapeMismatch, "train/validation window shapes differ");
  }
  cfg.window = train.window_len;

  Rng rng(derive_seed(cfg.seed, "birnn.init"));
  BiRNNModel model = make_birnn(static_cast<int>(train.dim()), cfg, rng);
  BiRNNModel grads = birnn_zeros_like(model);
  auto params = collect_params(model);
  auto gptrs = collect_params(grads);
  Vec velocity(params.size(), 0.0);

  TrainReport report;
  BiRNNModel best = model;
  double best_auc = -1.0;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr0 * std::pow(cfg.lr_decay, epoch - 1);
    double epoch_loss = 0.0;
    std::size_t n = train.count();
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      std::size_t b1 = std::min(n, b0 + cfg.batch_size);
      birnn_clear_grads(grads);
      double batch_loss = 0.0;
      {
        LookaheadGuard guard(params, velocity, cfg.momentum);
        const double scale = 1.0 / static_cast<double>(b1 - b0);
        for (std::size_t w = b0; w < b1; ++w) {
          std::uint64_t mask_seed =
              derive_seed(cfg.seed, "birnn.mask", (static_cast<std::uint64_t>(epoch) << 40) | w);
          batch_loss += birnn_window_loss_and_grad(model, train, w, mask_seed, scale, grads);
        }
      }
      batch_loss /= static_cast<double>(b1 - b0);
      if (std::isnan(batch_loss)) fail(Errc::Diverged, "training loss is NaN");
      nesterov_apply(params, velocity, gptrs, lr, cfg.momentum);
      epoch_loss += batch_loss * static_cast<double>(b1 - b0);
    }
    epoch_loss /= static_cast<double>(n);

    double val_auc = 0.5;
    {
      Vec scores = birnn_predict_all(model, validation);
      bool h0 = false, h1 = false;
      for (int v : validation.window_label) {
        h0 = h0 || v == 0;
        h1 = h1 || v == 1;
      }
      if (h0 && h1) {
        std::vector<int> labels = validation.window_label;
        val_auc = roc_auc(scores, labels);
      }
    }

    EpochStat st;
    st.train_loss = epoch_loss;
    st.val_auc = val_auc;
    st.lr = lr;
    report.epochs.push_back(st);

    if (val_auc > best_auc) {
      best_auc = val_auc;
      best = model;
      report.best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= cfg.patience) {
        report.stop_reason = "early-stop: validation AUC plateau";
        return {std::move(best), std::move(report)};
      }
    }
  }
  report.stop_reason = "max-epochs";
  return {std::move(best), std::move(report)};
}

// ---------------------------------------------------------------------------
// Finite-difference checks.

namespace {

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

template <class LossFn>
double fd_max_rel_err(const std::vector<double*>& params, const std::vector<double*>& analytic,
                      LossFn loss, int n_check, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "fd.pick"));
  const double h = 1e-5;
  double worst = 0.0;
  const std::size_t P = params.size();
  std::size_t todo = std::min<std::size_t>(P, static_cast<std::size_t>(n_check));
  for (std::size_t k = 0; k < todo; ++k) {
    std::size_t idx = P <= static_cast<std::size_t>(n_check) ? k : rng.index(P);
    double saved = *params[idx];
    *params[idx] = saved + h;
    double lp = loss();
    *params[idx] = saved - h;
    double lm = loss();
    *params[idx] = saved;
    double num = (lp - lm) / (2.0 * h);
    worst = std::max(worst, rel_err(*analytic[idx], num));
  }
  return worst;
}

}  // namespace

double numeric_gradient_check(MLPModel& m, const Mat& X, const std::vector<int>& y, int n_check,
                              std::uint64_t seed) {
  MLPModel grads = zeros_like(m);
  // Fixed dropout mask; run stats are restored afterwards so the check does
  // not mutate the model.
  auto saved_bn = m.layers;
  const std::uint64_t mask_seed = derive_seed(seed, "fd.mask");
  mlp_loss_and_grad(m, X, y, mask_seed, grads);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    m.layers[l].bn.run_mean = saved_bn[l].bn.run_mean;
    m.layers[l].bn.run_var = saved_bn[l].bn.run_var;
  }
  auto params = collect_params(m);
  auto gptrs = collect_params(grads);
  auto loss = [&]() {
    MLPTape tape;
    Vec probs = mlp_forward_tape(m, X, RunMode::Train, mask_seed, &tape);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      m.layers[l].bn.run_mean = saved_bn[l].bn.run_mean;
      m.layers[l].bn.run_var = saved_bn[l].bn.run_var;
    }
    double L = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
      double p = std::clamp(probs[r], 1e-12, 1.0 - 1e-12);
      L -= y[r] ? std::log(p) : std::log(1.0 - p);
    }
    return L / static_cast<double>(X.rows);
  };
  return fd_max_rel_err(params, gptrs, loss, n_check, seed);
}

double numeric_gradient_check(BiRNNModel& m, const WindowedTensor& batch, int n_check,
                              std::uint64_t seed) {
  if (batch.count() == 0) fail(Errc::EmptyDataset, "gradient check needs windows");
  const std::size_t n_windows = std::min<std::size_t>(batch.count(), 4);
  BiRNNModel grads = birnn_zeros_like(m);
  const std::uint64_t mask_root = derive_seed(seed, "fd.mask");
  for (std::size_t w = 0; w < n_windows; ++w) {
    birnn_window_loss_and_grad(m, batch, w, derive_seed(mask_root, "w", w),
                               1.0 / static_cast<double>(n_windows), grads);
  }
  auto params = collect_params(m);
  auto gptrs = collect_params(grads);
  auto loss = [&]() {
    double L = 0.0;
    for (std::size_t w = 0; w < n_windows; ++w) {
      L += birnn_forward_window(
          m, [&](int t) { return batch.step(w, t); }, batch.window_len, batch.window_label[w],
          RunMode::Train, derive_seed(mask_root, "w", w), nullptr);
    }
    return L / static_cast<double>(n_windows);
  };
  return fd_max_rel_err(params, gptrs, loss, n_check, seed);
}

double numeric_gradient_check(LSTMCellParams& p, const Mat& inputs, InputTransform variant,
                              int n_check, std::uint64_t seed) {
  if (inputs.cols != static_cast<std::size_t>(p.input_size)) {
    fail(Errc::ShapeMismatch, "gradient check inputs");
  }
  const int T = static_cast<int>(inputs.rows);
  const std::size_t H = static_cast<std::size_t>(p.hidden_size);
  // Scalar objective: sum over time of 0.5*||h_t||^2.
  auto run_forward = [&](std::vector<LSTMStepTape>* tapes, std::vector<LSTMState>* states) {
    LSTMState st{Vec(H, 0.0), Vec(H, 0.0)};
    double L = 0.0;
    for (int t = 0; t < T; ++t) {
      LSTMStepTape tape;
      st = lstm_cell_step(p, inputs.row(t), st, variant, &tape);
      for (double v : st.h) L += 0.5 * v * v;
      if (tapes) tapes->push_back(std::move(tape));
      if (states) states->push_back(st);
    }
    return L;
  };

  std::vector<LSTMStepTape> tapes;
  std::vector<LSTMState> states;
  run_forward(&tapes, &states);
  LSTMCellParams grads = lstm_zeros_like(p);
  Vec dh_carry(H, 0.0), dc_carry(H, 0.0), dx, dh_prev, dc_prev;
  LSTMState zero{Vec(H, 0.0), Vec(H, 0.0)};
  for (int t = T - 1; t >= 0; --t) {
    Vec dh(H);
    for (std::size_t k = 0; k < H; ++k) dh[k] = states[t].h[k] + dh_carry[k];
    const LSTMState& prev = t > 0 ? states[t - 1] : zero;
    lstm_cell_backward(p, variant, inputs.row(t), prev, tapes[t], dh, dc_carry, grads, dx,
                       dh_prev, dc_prev);
    dh_carry = std::move(dh_prev);
    dc_carry = std::move(dc_prev);
  }

  auto params = collect_params(p);
  auto gptrs = collect_params(grads);
  auto loss = [&]() { return run_forward(nullptr, nullptr); };
  return fd_max_rel_err(params, gptrs, loss, n_check, seed);
}

}  // namespace seqchoice
