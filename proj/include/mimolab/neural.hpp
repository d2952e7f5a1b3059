// From-scratch neural kernels: LSTM cell, fully connected layers, softmax
// head, cross entropy and Adam. Reverse-mode gradients are hand-written per
// operation against explicit tapes; no general autodiff.

#ifndef MIMOLAB_NEURAL_HPP
#define MIMOLAB_NEURAL_HPP

#include <cstdint>
#include <vector>

#include "mimolab/linalg.hpp"

namespace mimo {

double sigmoid(double z);

struct LstmParams {
    // gate weights are d_h x (d_h + d_x), biases d_h
    RealMatrix w_f, w_i, w_c, w_o;
    RealVector b_f, b_i, b_c, b_o;

    std::size_t d_h() const { return b_f.size(); }
    std::size_t d_x() const { return w_f.cols - d_h(); }
    static LstmParams zeros(std::size_t d_h, std::size_t d_x);
};

struct LstmState {
    RealVector c;  // cell state
    RealVector h;  // output
    static LstmState zeros(std::size_t d_h);
};

/// Forward intermediates of one step, enough to run the step backwards.
struct LstmStepTape {
    RealVector z;  // [h_prev, x]
    RealVector f, i, ctil, o;
    RealVector c_prev, c_new, tanh_c;
    RealVector h_out;
};

/// f/i/C~/o gates, C' = f*C + i*C~, h' = o*tanh(C'). Tape optional.
LstmState lstm_step(const LstmParams& p, const LstmState& st, const RealVector& x,
                    LstmStepTape* tape = nullptr);

/// Accumulates parameter gradients into `grads` (same shapes as the params)
/// and returns gradients for the previous state and the step input.
void lstm_backward(const LstmParams& p, const LstmStepTape& t, const RealVector& d_c_new,
                   const RealVector& d_h_new, LstmParams& grads, RealVector& d_c_prev,
                   RealVector& d_h_prev, RealVector& d_x);

enum class Activation { Linear, Relu, Tanh };

struct DenseLayer {
    RealMatrix w;
    RealVector b;
    Activation act = Activation::Linear;
};

struct DenseParams {
    std::vector<DenseLayer> layers;
    std::size_t input_dim() const { return layers.front().w.cols; }
    std::size_t output_dim() const { return layers.back().w.rows; }
};

struct DenseTape {
    std::vector<RealVector> post;  // post[0] = input, post[l] = output of layer l
};

RealVector dnn_forward(const DenseParams& p, const RealVector& x, DenseTape* tape = nullptr);

void dnn_backward(const DenseParams& p, const DenseTape& t, const RealVector& d_out,
                  DenseParams& grads, RealVector& d_in);

struct SoftmaxParams {
    RealMatrix w;  // M x d_h, row i is w_i
    std::size_t M() const { return w.rows; }
};

/// p_i = exp(h . w_i) / sum_j exp(h . w_j), computed with max subtraction.
RealVector softmax_head(const SoftmaxParams& p, const RealVector& h);

/// -log p_hat[true_index], probability floored at 1e-30.
double cross_entropy(std::size_t true_index, const RealVector& p_hat);
/// Same with an explicit one-hot target vector.
double cross_entropy(const RealVector& p_true, const RealVector& p_hat);

/// Fused softmax + cross-entropy backward: logits gradient is
/// scale * (p_hat - onehot). Accumulates into `grads` and into d_h.
void softmax_ce_backward(const SoftmaxParams& p, const RealVector& h, const RealVector& p_hat,
                         std::size_t true_index, double scale, SoftmaxParams& grads,
                         RealVector& d_h);

struct AdamConfig {
    double lr = 0.0006;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // training-loop schedule: lr decays linearly to lr * final_lr_fraction
    // over the run (1.0 keeps it constant)
    double final_lr_fraction = 1.0;
};

struct AdamState {
    AdamConfig cfg;
    RealVector m, v;
    std::int64_t t = 0;

    AdamState(std::size_t n, AdamConfig config)
        : cfg(config), m(n, 0.0), v(n, 0.0) {}
};

/// In-place update of `params`. Throws on non-finite gradients.
void adam_step(AdamState& st, RealVector& params, const RealVector& grads);

}  // namespace mimo

#endif
