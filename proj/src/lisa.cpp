#include "mimolab/lisa.hpp"

#include <cmath>
#include <stdexcept>

#include "mimolab/parallel.hpp"

namespace mimo {

std::string variant_label(LisaVariant v) {
    return v == LisaVariant::Varying ? "varying" : "fixed";
}

LisaVariant parse_variant(const std::string& s) {
    if (s == "varying") return LisaVariant::Varying;
    if (s == "fixed") return LisaVariant::Fixed;
    throw std::invalid_argument("unknown variant: " + s);
}

std::size_t LisaModel::M() const { return steps.front().softmax.M(); }

std::size_t lisa_varying_param_count(std::size_t n_t, std::size_t d_h, std::size_t m) {
    return 4 * n_t * d_h * (2 * n_t + 2 * d_h + 5) + 2 * n_t * d_h * m;
}

namespace {

// Visits every parameter tensor in the declared (checkpoint) order: per step
// W_f, b_f, W_i, b_i, W_C, b_C, W_o, b_o (or the dense layers), softmax W.
template <typename Model, typename F>
void for_each_tensor(Model& m, F&& f) {
    for (auto& s : m.steps) {
        if (m.variant == LisaVariant::Varying) {
            f(s.lstm.w_f.data);
            f(s.lstm.b_f);
            f(s.lstm.w_i.data);
            f(s.lstm.b_i);
            f(s.lstm.w_c.data);
            f(s.lstm.b_c);
            f(s.lstm.w_o.data);
            f(s.lstm.b_o);
        } else {
            for (auto& l : s.dense.layers) {
                f(l.w.data);
                f(l.b);
            }
        }
        f(s.softmax.w.data);
    }
}

void add_grads(LisaModel& dst, const LisaModel& src) {
    std::vector<const RealVector*> src_tensors;
    for_each_tensor(src, [&](const RealVector& t) { src_tensors.push_back(&t); });
    std::size_t idx = 0;
    for_each_tensor(dst, [&](RealVector& t) {
        const RealVector& s = *src_tensors[idx++];
        for (std::size_t j = 0; j < t.size(); ++j) t[j] += s[j];
    });
}

void zero_grads(LisaModel& m) {
    for_each_tensor(m, [](RealVector& t) { std::fill(t.begin(), t.end(), 0.0); });
}

// x_k for the varying variant, 0-based step k: (y~_k, l_k0..l_kk), width k+2.
RealVector varying_input(const RealVector& y_tilde, const RealMatrix& l, std::size_t k) {
    RealVector x(k + 2);
    x[0] = y_tilde[k];
    for (std::size_t j = 0; j <= k; ++j) x[j + 1] = l(k, j);
    return x;
}

}  // namespace

std::size_t LisaModel::param_count() const {
    std::size_t n = 0;
    for_each_tensor(*this, [&](const RealVector& t) { n += t.size(); });
    return n;
}

RealVector LisaModel::pack() const {
    RealVector flat;
    flat.reserve(param_count());
    for_each_tensor(*this, [&](const RealVector& t) {
        flat.insert(flat.end(), t.begin(), t.end());
    });
    return flat;
}

void LisaModel::unpack(const RealVector& flat) {
    if (flat.size() != param_count())
        throw std::invalid_argument("unpack: flat parameter size mismatch");
    std::size_t pos = 0;
    for_each_tensor(*this, [&](RealVector& t) {
        std::copy(flat.begin() + pos, flat.begin() + pos + t.size(), t.begin());
        pos += t.size();
    });
}

namespace {

void init_matrix(RealMatrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& e : w.data) e = rng.uniform(-bound, bound);
}

}  // namespace

LisaModel init_lisa_model(LisaVariant variant, std::size_t n_t, std::size_t d_h,
                          std::size_t n_blocks, Modulation constellation, Rng rng) {
    if (n_t < 1 || d_h < 1 || n_blocks < 1)
        throw std::invalid_argument("init_lisa_model: counts must be >= 1");
    const Constellation c = make_constellation(constellation);

    LisaModel model;
    model.variant = variant;
    model.n_t = n_t;
    model.d_h = d_h;
    model.n_blocks = n_blocks;
    model.constellation = constellation;
    model.steps.resize(2 * n_t);

    for (std::size_t k = 0; k < model.n_steps(); ++k) {
        StepParams& s = model.steps[k];
        if (variant == LisaVariant::Varying) {
            const std::size_t d_x = k + 2;  // (k+1)+1 in 1-based step numbering
            s.lstm = LstmParams::zeros(d_h, d_x);
            init_matrix(s.lstm.w_f, d_h + d_x, d_h, rng);
            init_matrix(s.lstm.w_i, d_h + d_x, d_h, rng);
            init_matrix(s.lstm.w_c, d_h + d_x, d_h, rng);
            init_matrix(s.lstm.w_o, d_h + d_x, d_h, rng);
            std::fill(s.lstm.b_f.begin(), s.lstm.b_f.end(), 1.0);
        } else {
            // three layers: (d_h + 1) -> d_h -> d_h, relu hidden, linear out
            DenseLayer hidden{RealMatrix(d_h, d_h + 1), RealVector(d_h, 0.0), Activation::Relu};
            DenseLayer out{RealMatrix(d_h, d_h), RealVector(d_h, 0.0), Activation::Linear};
            init_matrix(hidden.w, d_h + 1, d_h, rng);
            init_matrix(out.w, d_h, d_h, rng);
            s.dense.layers = {std::move(hidden), std::move(out)};
        }
        s.softmax.w = RealMatrix(c.M, d_h);
        init_matrix(s.softmax.w, d_h, c.M, rng);
    }
    return model;
}

BlockOutput construct_block_varying(const LisaModel& model, const RealVector& y_tilde,
                                    const RealMatrix& l, const LstmState& init) {
    if (model.variant != LisaVariant::Varying)
        throw std::invalid_argument("construct_block_varying: model is not the varying variant");
    if (y_tilde.size() != model.n_steps() || l.rows != model.n_steps() || l.cols != model.n_steps())
        throw std::invalid_argument("construct_block_varying: dimension mismatch");

    BlockOutput out;
    out.p_hat = RealMatrix(model.n_steps(), model.M());
    LstmState st = init;
    for (std::size_t k = 0; k < model.n_steps(); ++k) {
        st = lstm_step(model.steps[k].lstm, st, varying_input(y_tilde, l, k));
        RealVector p = softmax_head(model.steps[k].softmax, st.h);
        std::copy(p.begin(), p.end(), out.p_hat.row(k));
    }
    out.final_state = std::move(st);
    return out;
}

BlockOutput construct_block_fixed(const LisaModel& model, const RealVector& y_tilde,
                                  const RealVector& init_h) {
    if (model.variant != LisaVariant::Fixed)
        throw std::invalid_argument("construct_block_fixed: model is not the fixed variant");
    if (y_tilde.size() != model.n_steps())
        throw std::invalid_argument("construct_block_fixed: dimension mismatch");

    BlockOutput out;
    out.p_hat = RealMatrix(model.n_steps(), model.M());
    RealVector h = init_h;
    for (std::size_t k = 0; k < model.n_steps(); ++k) {
        RealVector z(model.d_h + 1);
        std::copy(h.begin(), h.end(), z.begin());
        z[model.d_h] = y_tilde[k];
        h = dnn_forward(model.steps[k].dense, z);
        RealVector p = softmax_head(model.steps[k].softmax, h);
        std::copy(p.begin(), p.end(), out.p_hat.row(k));
    }
    out.final_state.h = std::move(h);
    return out;
}

RealMatrix lisa_forward(const LisaModel& model, const RealVector& y_tilde, const RealMatrix& l) {
    if (model.variant == LisaVariant::Varying) {
        BlockOutput out;
        LstmState st = LstmState::zeros(model.d_h);
        for (std::size_t b = 0; b < model.n_blocks; ++b) {
            out = construct_block_varying(model, y_tilde, l, st);
            st = out.final_state;
        }
        return out.p_hat;
    }
    BlockOutput out;
    RealVector h(model.d_h, 0.0);
    for (std::size_t b = 0; b < model.n_blocks; ++b) {
        out = construct_block_fixed(model, y_tilde, h);
        h = out.final_state.h;
    }
    return out.p_hat;
}

RealMatrix lisa_forward_tape(const LisaModel& model, const RealVector& y_tilde,
                             const RealMatrix& l, LisaTape& tape) {
    const std::size_t n_steps = model.n_steps();
    tape.lstm_steps.clear();
    tape.dense_steps.clear();
    tape.h_final.clear();
    tape.p_last = RealMatrix(n_steps, model.M());

    if (model.variant == LisaVariant::Varying) {
        tape.lstm_steps.resize(model.n_blocks * n_steps);
        LstmState st = LstmState::zeros(model.d_h);
        for (std::size_t b = 0; b < model.n_blocks; ++b) {
            for (std::size_t k = 0; k < n_steps; ++k) {
                st = lstm_step(model.steps[k].lstm, st, varying_input(y_tilde, l, k),
                               &tape.lstm_steps[b * n_steps + k]);
                if (b + 1 == model.n_blocks) {
                    tape.h_final.push_back(st.h);
                    RealVector p = softmax_head(model.steps[k].softmax, st.h);
                    std::copy(p.begin(), p.end(), tape.p_last.row(k));
                }
            }
        }
    } else {
        tape.dense_steps.resize(model.n_blocks * n_steps);
        RealVector h(model.d_h, 0.0);
        for (std::size_t b = 0; b < model.n_blocks; ++b) {
            for (std::size_t k = 0; k < n_steps; ++k) {
                RealVector z(model.d_h + 1);
                std::copy(h.begin(), h.end(), z.begin());
                z[model.d_h] = y_tilde[k];
                h = dnn_forward(model.steps[k].dense, z, &tape.dense_steps[b * n_steps + k]);
                if (b + 1 == model.n_blocks) {
                    tape.h_final.push_back(h);
                    RealVector p = softmax_head(model.steps[k].softmax, h);
                    std::copy(p.begin(), p.end(), tape.p_last.row(k));
                }
            }
        }
    }
    return tape.p_last;
}

LisaModel zero_grads_like(const LisaModel& model) {
    LisaModel g = model;
    zero_grads(g);
    return g;
}

void lisa_backward(const LisaModel& model, const LisaTape& tape,
                   const std::vector<std::uint32_t>& target_idx, double scale,
                   LisaModel& grads) {
    const std::size_t n_steps = model.n_steps();
    if (target_idx.size() != n_steps)
        throw std::invalid_argument("lisa_backward: target size mismatch");

    RealVector d_c(model.d_h, 0.0), d_h(model.d_h, 0.0);
    RealVector d_c_prev, d_h_prev, d_x;

    for (std::size_t b = model.n_blocks; b-- > 0;) {
        for (std::size_t k = n_steps; k-- > 0;) {
            if (b + 1 == model.n_blocks) {
                RealVector p_row(tape.p_last.row(k), tape.p_last.row(k) + model.M());
                softmax_ce_backward(model.steps[k].softmax, tape.h_final[k], p_row,
                                    target_idx[k], scale, grads.steps[k].softmax, d_h);
            }
            if (model.variant == LisaVariant::Varying) {
                lstm_backward(model.steps[k].lstm, tape.lstm_steps[b * n_steps + k], d_c, d_h,
                              grads.steps[k].lstm, d_c_prev, d_h_prev, d_x);
                d_c = d_c_prev;
                d_h = d_h_prev;
            } else {
                RealVector d_in;
                dnn_backward(model.steps[k].dense, tape.dense_steps[b * n_steps + k], d_h,
                             grads.steps[k].dense, d_in);
                d_h.assign(d_in.begin(), d_in.begin() + model.d_h);
            }
        }
    }
}

double batch_loss(const LisaModel& model, std::span<const ChannelSample> batch) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    double total = 0.0;
    for (const ChannelSample& smp : batch) {
        const RealMatrix p = lisa_forward(model, smp.y_tilde, smp.ql.L);
        for (std::size_t k = 0; k < model.n_steps(); ++k)
            total += cross_entropy(smp.s_idx[k], RealVector(p.row(k), p.row(k) + model.M()));
    }
    return total / static_cast<double>(batch.size());
}

RealVector hard_decisions(const Constellation& c, const RealMatrix& p_hat) {
    RealVector s(p_hat.rows);
    for (std::size_t k = 0; k < p_hat.rows; ++k) {
        const double* row = p_hat.row(k);
        std::size_t best = 0;
        for (std::size_t i = 1; i < p_hat.cols; ++i)
            if (row[i] > row[best]) best = i;
        s[k] = c.alphabet[best];
    }
    return s;
}

RealVector lisa_detect(const LisaModel& model, const ChannelSample& smp) {
    const Constellation c = make_constellation(model.constellation);
    const RealVector s_fwd = hard_decisions(c, lisa_forward(model, smp.y_tilde, smp.ql.L));
    if (model.variant == LisaVariant::Fixed) return s_fwd;

    // reverse order: reverse the columns of H_hat, re-factorize, detect, then
    // un-reverse the recovered symbols
    const RealMatrix h_rev = reverse_columns(smp.H_hat);
    const QLFactors ql_rev = ql_decompose(h_rev);
    if (ql_rev.rank_deficient) return s_fwd;
    const RealVector y_tilde_rev = rotate_observation(ql_rev.Q, smp.y);
    const RealVector s_rev_order = hard_decisions(c, lisa_forward(model, y_tilde_rev, ql_rev.L));
    RealVector s_rev(s_rev_order.size());
    for (std::size_t i = 0; i < s_rev.size(); ++i)
        s_rev[i] = s_rev_order[s_rev_order.size() - 1 - i];

    const double r_fwd = residual_metric(smp.y, smp.H_hat, s_fwd);
    const double r_rev = residual_metric(smp.y, smp.H_hat, s_rev);
    return r_fwd <= r_rev ? s_fwd : s_rev;
}

void TrainConfig::validate() const {
    channel.validate();
    if (epochs < 1 || batches_per_epoch < 1 || batch_size < 1)
        throw std::invalid_argument("train: epochs, batches_per_epoch and batch_size must be >= 1");
    if (d_h < 1 || n_blocks < 1)
        throw std::invalid_argument("train: d_h and n_blocks must be >= 1");
}

namespace {

constexpr std::size_t kGradChunks = 8;  // fixed so the batch partition and the
                                        // reduction order never depend on the
                                        // thread count

struct ChunkAccum {
    LisaModel grads;
    double ce_sum = 0.0;
    std::size_t n_samples = 0;
};

}  // namespace

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    const Constellation c = make_constellation(cfg.constellation);
    const ChannelGenerator gen(cfg.channel, c);

    Rng master(cfg.seed);
    LisaModel model = init_lisa_model(cfg.variant, cfg.channel.n_t, cfg.d_h, cfg.n_blocks,
                                      cfg.constellation, master.fork(0));

    // Fixed-channel scenario: one channel drawn up front, reused for every
    // sample of the run.
    ComplexMatrix fixed_channel;
    if (cfg.variant == LisaVariant::Fixed) {
        Rng hrng = master.fork(1);
        fixed_channel = cfg.channel.model == ChannelModel::Kronecker
                            ? sample_kronecker_channel(cfg.channel, hrng)
                            : sample_iid_channel(cfg.channel, hrng);
    }

    AdamState adam(model.param_count(), cfg.adam);
    RealVector flat = model.pack();

    TrainResult result;
    result.trace.reserve(cfg.epochs * cfg.batches_per_epoch);

    std::vector<ChunkAccum> chunks(kGradChunks);
    for (ChunkAccum& acc : chunks) acc.grads = zero_grads_like(model);
    LisaModel grads = zero_grads_like(model);

    const std::size_t total_batches = cfg.epochs * cfg.batches_per_epoch;
    const double lr0 = cfg.adam.lr;

    std::size_t t = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t batch = 1; batch <= cfg.batches_per_epoch; ++batch) {
            ++t;
            if (cfg.adam.final_lr_fraction != 1.0 && total_batches > 1) {
                const double progress =
                    static_cast<double>(t - 1) / static_cast<double>(total_batches - 1);
                adam.cfg.lr = lr0 * (1.0 - (1.0 - cfg.adam.final_lr_fraction) * progress);
            }
            const Rng batch_rng = master.fork(1000 + t);

            run_chunks(kGradChunks, cfg.threads, [&](std::size_t ci) {
                ChunkAccum& acc = chunks[ci];
                zero_grads(acc.grads);
                acc.ce_sum = 0.0;
                const std::size_t lo = ci * cfg.batch_size / kGradChunks;
                const std::size_t hi = (ci + 1) * cfg.batch_size / kGradChunks;
                acc.n_samples = hi - lo;
                if (lo == hi) return;
                Rng rng = batch_rng.fork(ci);
                LisaTape tape;
                for (std::size_t s = lo; s < hi; ++s) {
                    const ChannelSample smp =
                        cfg.variant == LisaVariant::Fixed
                            ? gen.generate_with_channel(fixed_channel, rng)
                            : gen.generate(rng);
                    const RealMatrix p = lisa_forward_tape(model, smp.y_tilde, smp.ql.L, tape);
                    for (std::size_t k = 0; k < model.n_steps(); ++k)
                        acc.ce_sum +=
                            cross_entropy(smp.s_idx[k], RealVector(p.row(k), p.row(k) + model.M()));
                    lisa_backward(model, tape, smp.s_idx, 1.0, acc.grads);
                }
            });

            double ce_total = 0.0;
            zero_grads(grads);
            for (const ChunkAccum& acc : chunks) {  // fixed order
                ce_total += acc.ce_sum;
                if (acc.n_samples > 0) add_grads(grads, acc.grads);
            }
            RealVector gflat = grads.pack();
            const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
            for (double& g : gflat) g *= inv_b;
            const double loss = ce_total * inv_b;

            if (!std::isfinite(loss)) {
                result.completed = false;
                result.message = "non-finite loss at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(batch) +
                                 "; parameters reverted to the last finite batch";
                result.model = model;
                return result;
            }

            result.trace.push_back({t, epoch, loss});
            adam_step(adam, flat, gflat);
            model.unpack(flat);
        }
    }

    result.model = std::move(model);
    return result;
}

}  // namespace mimo
