// The LISA detector: sequential symbol construction over the QL tree with a
// per-step LSTM (varying channel) or per-step DNN (fixed channel), a softmax
// soft decision per symbol, multi-block unfolding with carried state, online
// training per Alg-style mini-batches, and residual-selected forward/reverse
// inference.
//
// Step k (1-based) of the varying variant consumes x_k = (y~_k, l_k1..l_kk),
// so its input width is k+1; parameters are per step, shared across blocks.

#ifndef MIMOLAB_LISA_HPP
#define MIMOLAB_LISA_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mimolab/channel.hpp"
#include "mimolab/linalg.hpp"
#include "mimolab/modem.hpp"
#include "mimolab/neural.hpp"

namespace mimo {

enum class LisaVariant { Varying, Fixed };

std::string variant_label(LisaVariant v);
LisaVariant parse_variant(const std::string& s);

struct StepParams {
    LstmParams lstm;    // varying variant
    DenseParams dense;  // fixed variant
    SoftmaxParams softmax;
};

struct LisaModel {
    LisaVariant variant = LisaVariant::Varying;
    std::size_t n_t = 0;
    std::size_t d_h = 0;
    std::size_t n_blocks = 1;
    Modulation constellation = Modulation::QPSK;
    std::vector<StepParams> steps;  // exactly 2 n_t entries

    std::size_t n_steps() const { return 2 * n_t; }
    std::size_t M() const;
    std::size_t param_count() const;

    /// Flat layout, per step: W_f, b_f, W_i, b_i, W_C, b_C, W_o, b_o, softmax W
    /// (fixed variant: W_1, b_1, ..., W_m, b_m, softmax W). Matrices row-major.
    RealVector pack() const;
    void unpack(const RealVector& flat);
};

/// 4 N_T d_h (2 N_T + 2 d_h + 5) + 2 N_T d_h M — the varying-variant total.
std::size_t lisa_varying_param_count(std::size_t n_t, std::size_t d_h, std::size_t m);

/// Fresh model with uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases
/// and forget-gate bias 1.
LisaModel init_lisa_model(LisaVariant variant, std::size_t n_t, std::size_t d_h,
                          std::size_t n_blocks, Modulation constellation, Rng rng);

struct BlockOutput {
    RealMatrix p_hat;      // n_steps x M, each row sums to 1
    LstmState final_state;  // fixed variant uses only .h
};

BlockOutput construct_block_varying(const LisaModel& model, const RealVector& y_tilde,
                                    const RealMatrix& l, const LstmState& init);
BlockOutput construct_block_fixed(const LisaModel& model, const RealVector& y_tilde,
                                  const RealVector& init_h);

/// Chains n_blocks blocks from the zero state; returns the last block's
/// probability matrix.
RealMatrix lisa_forward(const LisaModel& model, const RealVector& y_tilde, const RealMatrix& l);

/// Forward pass with recorded intermediates for lisa_backward.
struct LisaTape {
    std::vector<LstmStepTape> lstm_steps;  // n_blocks * n_steps when varying
    std::vector<DenseTape> dense_steps;    // n_blocks * n_steps when fixed
    std::vector<RealVector> h_final;       // per step of the LAST block
    RealMatrix p_last;
};
RealMatrix lisa_forward_tape(const LisaModel& model, const RealVector& y_tilde,
                             const RealMatrix& l, LisaTape& tape);

/// Gradient holder with the same shapes as the model parameters.
LisaModel zero_grads_like(const LisaModel& model);

/// Reverse-mode pass over a recorded forward. The seed scales the per-symbol
/// cross-entropy logit gradients (p_hat - onehot); scale 0 gives exactly zero
/// gradients. Accumulates into `grads`.
void lisa_backward(const LisaModel& model, const LisaTape& tape,
                   const std::vector<std::uint32_t>& target_idx, double scale,
                   LisaModel& grads);

/// Mean over samples of the summed per-symbol cross entropies of the last
/// block against the one-hot truths.
double batch_loss(const LisaModel& model, std::span<const ChannelSample> batch);

/// Per-symbol hard decisions: argmax of each probability row, ties to the
/// lowest alphabet index.
RealVector hard_decisions(const Constellation& c, const RealMatrix& p_hat);

/// Detection with forward/reverse post-processing for the varying variant
/// (the candidate with the smaller ||y - H_hat s||^2 wins); the fixed variant
/// detects in the original order only.
RealVector lisa_detect(const LisaModel& model, const ChannelSample& smp);

struct TrainConfig {
    LisaVariant variant = LisaVariant::Varying;
    ChannelConfig channel;
    Modulation constellation = Modulation::QPSK;
    std::size_t d_h = 64;
    std::size_t n_blocks = 2;
    std::size_t epochs = 1;
    std::size_t batches_per_epoch = 1;
    std::size_t batch_size = 1;
    AdamConfig adam;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

struct LossPoint {
    std::size_t batch = 0;  // global batch counter, 1-based
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
};

struct TrainResult {
    LisaModel model;
    std::vector<LossPoint> trace;
    bool completed = true;
    std::string message;
};

/// Online training: every mini-batch is freshly generated from the seed
/// stream, the loss is computed, gradients are reduced in a fixed chunk
/// order and Adam updates the shared parameters. A non-finite loss reverts
/// to the previous parameters and stops.
TrainResult train(const TrainConfig& cfg);

}  // namespace mimo

#endif
