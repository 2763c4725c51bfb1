// deep.hpp — from-scratch feed-forward net (ELU, batch norm, dropout, He
// init, Nesterov SGD) and the stacked bidirectional LSTM sequence classifier,
// with finite-difference gradient checking.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqchoice/data.hpp"
#include "seqchoice/linalg.hpp"

namespace seqchoice {

struct EpochStat {
  double train_loss = 0.0;
  double val_auc = 0.0;  // NaN when no validation set is involved
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  std::string stop_reason;
  int best_epoch = -1;  // 1-based epoch of the returned snapshot, -1 if n/a
};

// ---------------------------------------------------------------------------
// Feed-forward network.

struct MLPConfig {
  std::vector<int> hidden_sizes{64, 32};
  double elu_alpha = 1.0;
  double dropout_p = 0.5;
  bool batchnorm = true;
  double learning_rate = 0.1;
  double momentum = 0.9;  // Nesterov
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BatchNormParams {
  Vec gamma, beta;
  Vec run_mean, run_var;
};

struct MLPLayer {
  Mat W;  // out x in
  Vec b;
  BatchNormParams bn;
};

struct MLPModel {
  MLPConfig cfg;
  int input_dim = 0;
  std::vector<MLPLayer> layers;
  Vec w_out;
  double b_out = 0.0;
};

enum class RunMode { Train, Infer };

double elu(double x, double alpha);

// Train mode normalizes with batch statistics and applies inverted-scaling
// dropout from `mask_seed`; infer mode uses running statistics, no dropout.
Vec mlp_forward(const MLPModel& m, const Mat& batch, RunMode mode, std::uint64_t mask_seed = 0);

std::pair<MLPModel, TrainReport> mlp_train(const Mat& X, const std::vector<int>& y,
                                           const MLPConfig& cfg);

double mlp_predict(const MLPModel& m, std::span<const double> x);

// ---------------------------------------------------------------------------
// LSTM cell (gates i, f, o and input transform j).

enum class InputTransform { SigmoidPerPaper, TanhStandard };

struct LSTMCellParams {
  Mat W_xi, W_hi;
  Vec b_i;
  Mat W_xf, W_hf;
  Vec b_f;
  Mat W_xo, W_ho;
  Vec b_o;
  Mat W_xj, W_hj;
  Vec b_j;
  int input_size = 0;
  int hidden_size = 0;
};

LSTMCellParams make_lstm_cell(int input_size, int hidden_size);

struct LSTMState {
  Vec h, c;
};

struct LSTMStepTape {
  Vec i, f, o, j, c, h, tanh_c;
};

// i,f,o = sigmoid(W_x x + W_h h + b); j per the input-transform variant;
// c_t = f*c + i*j; h_t = tanh(c_t)*o.
LSTMState lstm_cell_step(const LSTMCellParams& p, std::span<const double> x,
                         const LSTMState& prev, InputTransform variant,
                         LSTMStepTape* tape = nullptr);

// ---------------------------------------------------------------------------
// Stacked bidirectional LSTM classifier.

struct BiRNNConfig {
  int n_layers = 3;
  int hidden_size = 64;
  double dropout_p = 0.6;
  int window = 120;
  int batch_size = 240;  // a small multiple of the window length
  double lr0 = 0.05;
  double lr_decay = 0.85;  // lr_e = lr0 * decay^(e-1)
  int max_epochs = 35;
  int patience = 5;
  double momentum = 0.9;
  InputTransform input_transform = InputTransform::SigmoidPerPaper;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BiRNNModel {
  BiRNNConfig cfg;
  int input_dim = 0;
  std::vector<LSTMCellParams> fwd, bwd;  // one per stacked layer
  Mat W_fc;  // 2 x (2*hidden)
  Vec b_fc;
};

std::pair<BiRNNModel, TrainReport> birnn_train(const WindowedTensor& train,
                                               const WindowedTensor& validation,
                                               const BiRNNConfig& cfg);

// P(class 1) for one window of exactly cfg.window rows.
double birnn_predict(const BiRNNModel& m, const Mat& window);
double birnn_predict(const BiRNNModel& m, const WindowedTensor& wt, std::size_t w);
Vec birnn_predict_all(const BiRNNModel& m, const WindowedTensor& wt);

// ---------------------------------------------------------------------------
// Finite-difference gradient checks (central differences, double precision).
// Each returns the max relative error over >= n_check randomly chosen
// parameters.

double numeric_gradient_check(MLPModel& m, const Mat& X, const std::vector<int>& y,
                              int n_check = 200, std::uint64_t seed = 1);
double numeric_gradient_check(BiRNNModel& m, const WindowedTensor& batch, int n_check = 200,
                              std::uint64_t seed = 1);
double numeric_gradient_check(LSTMCellParams& p, const Mat& inputs, InputTransform variant,
                              int n_check = 200, std::uint64_t seed = 1);

// Parameter pointers in a fixed traversal order (shared by the optimizers,
// serialization, and the checks above).
std::vector<double*> collect_params(MLPModel& m);
std::vector<double*> collect_params(LSTMCellParams& p);
std::vector<double*> collect_params(BiRNNModel& m);

}  // namespace seqchoice
