#include "mimolab/neural.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mimo {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

LstmParams LstmParams::zeros(std::size_t d_h, std::size_t d_x) {
    LstmParams p;
    p.w_f = p.w_i = p.w_c = p.w_o = RealMatrix(d_h, d_h + d_x);
    p.b_f = p.b_i = p.b_c = p.b_o = RealVector(d_h, 0.0);
    return p;
}

LstmState LstmState::zeros(std::size_t d_h) {
    return LstmState{RealVector(d_h, 0.0), RealVector(d_h, 0.0)};
}

namespace {

// y = W z + b followed by an elementwise activation
void affine_into(const RealMatrix& w, const RealVector& b, const RealVector& z,
                 RealVector& out) {
    out.resize(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.row(r);
        double acc = b[r];
        for (std::size_t j = 0; j < w.cols; ++j) acc += wr[j] * z[j];
        out[r] = acc;
    }
}

void apply_sigmoid(RealVector& v) {
    for (double& e : v) e = sigmoid(e);
}

void apply_tanh(RealVector& v) {
    for (double& e : v) e = std::tanh(e);
}

// grads for one affine gate: gw += dpre z^T, gb += dpre, dz += W^T dpre
void affine_backward(const RealMatrix& w, const RealVector& z, const RealVector& dpre,
                     RealMatrix& gw, RealVector& gb, RealVector& dz) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double g = dpre[r];
        gb[r] += g;
        double* gwr = gw.row(r);
        const double* wr = w.row(r);
        for (std::size_t j = 0; j < w.cols; ++j) {
            gwr[j] += g * z[j];
            dz[j] += wr[j] * g;
        }
    }
}

}  // namespace

LstmState lstm_step(const LstmParams& p, const LstmState& st, const RealVector& x,
                    LstmStepTape* tape) {
    const std::size_t d_h = p.d_h();
    if (x.size() != p.d_x() || st.h.size() != d_h || st.c.size() != d_h)
        throw std::invalid_argument("lstm_step: dimension mismatch");

    RealVector z(d_h + x.size());
    std::copy(st.h.begin(), st.h.end(), z.begin());
    std::copy(x.begin(), x.end(), z.begin() + d_h);

    RealVector f, i, ctil, o;
    affine_into(p.w_f, p.b_f, z, f);
    apply_sigmoid(f);
    affine_into(p.w_i, p.b_i, z, i);
    apply_sigmoid(i);
    affine_into(p.w_c, p.b_c, z, ctil);
    apply_tanh(ctil);
    affine_into(p.w_o, p.b_o, z, o);
    apply_sigmoid(o);

    LstmState out;
    out.c.resize(d_h);
    out.h.resize(d_h);
    RealVector tanh_c(d_h);
    for (std::size_t k = 0; k < d_h; ++k) {
        out.c[k] = f[k] * st.c[k] + i[k] * ctil[k];
        tanh_c[k] = std::tanh(out.c[k]);
        out.h[k] = o[k] * tanh_c[k];
    }

    if (tape) {
        tape->z = std::move(z);
        tape->f = std::move(f);
        tape->i = std::move(i);
        tape->ctil = std::move(ctil);
        tape->o = std::move(o);
        tape->c_prev = st.c;
        tape->c_new = out.c;
        tape->tanh_c = std::move(tanh_c);
        tape->h_out = out.h;
    }
    return out;
}

void lstm_backward(const LstmParams& p, const LstmStepTape& t, const RealVector& d_c_new,
                   const RealVector& d_h_new, LstmParams& grads, RealVector& d_c_prev,
                   RealVector& d_h_prev, RealVector& d_x) {
    const std::size_t d_h = p.d_h();
    const std::size_t d_z = t.z.size();

    RealVector dzf(d_h), dzi(d_h), dzc(d_h), dzo(d_h);
    d_c_prev.assign(d_h, 0.0);
    for (std::size_t k = 0; k < d_h; ++k) {
        const double d_o = d_h_new[k] * t.tanh_c[k];
        const double d_c_tot =
            d_c_new[k] + d_h_new[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
        const double d_f = d_c_tot * t.c_prev[k];
        const double d_i = d_c_tot * t.ctil[k];
        const double d_ctil = d_c_tot * t.i[k];
        d_c_prev[k] = d_c_tot * t.f[k];
        dzf[k] = d_f * t.f[k] * (1.0 - t.f[k]);
        dzi[k] = d_i * t.i[k] * (1.0 - t.i[k]);
        dzc[k] = d_ctil * (1.0 - t.ctil[k] * t.ctil[k]);
        dzo[k] = d_o * t.o[k] * (1.0 - t.o[k]);
    }

    RealVector dz(d_z, 0.0);
    affine_backward(p.w_f, t.z, dzf, grads.w_f, grads.b_f, dz);
    affine_backward(p.w_i, t.z, dzi, grads.w_i, grads.b_i, dz);
    affine_backward(p.w_c, t.z, dzc, grads.w_c, grads.b_c, dz);
    affine_backward(p.w_o, t.z, dzo, grads.w_o, grads.b_o, dz);

    d_h_prev.assign(dz.begin(), dz.begin() + d_h);
    d_x.assign(dz.begin() + d_h, dz.end());
}

RealVector dnn_forward(const DenseParams& p, const RealVector& x, DenseTape* tape) {
    if (x.size() != p.input_dim())
        throw std::invalid_argument("dnn_forward: dimension mismatch");
    if (tape) {
        tape->post.clear();
        tape->post.push_back(x);
    }
    RealVector a = x;
    for (const DenseLayer& layer : p.layers) {
        RealVector next;
        affine_into(layer.w, layer.b, a, next);
        switch (layer.act) {
            case Activation::Linear: break;
            case Activation::Relu:
                for (double& e : next) e = e > 0.0 ? e : 0.0;
                break;
            case Activation::Tanh: apply_tanh(next); break;
        }
        a = std::move(next);
        if (tape) tape->post.push_back(a);
    }
    return a;
}

void dnn_backward(const DenseParams& p, const DenseTape& t, const RealVector& d_out,
                  DenseParams& grads, RealVector& d_in) {
    RealVector da = d_out;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const DenseLayer& layer = p.layers[l];
        const RealVector& out = t.post[l + 1];
        RealVector dpre(out.size());
        for (std::size_t k = 0; k < out.size(); ++k) {
            switch (layer.act) {
                case Activation::Linear: dpre[k] = da[k]; break;
                case Activation::Relu: dpre[k] = out[k] > 0.0 ? da[k] : 0.0; break;
                case Activation::Tanh: dpre[k] = da[k] * (1.0 - out[k] * out[k]); break;
            }
        }
        RealVector dz(layer.w.cols, 0.0);
        affine_backward(layer.w, t.post[l], dpre, grads.layers[l].w, grads.layers[l].b, dz);
        da = std::move(dz);
    }
    d_in = std::move(da);
}

RealVector softmax_head(const SoftmaxParams& p, const RealVector& h) {
    if (h.size() != p.w.cols)
        throw std::invalid_argument("softmax_head: dimension mismatch");
    RealVector logits = matvec(p.w, h);
    double peak = logits[0];
    for (double v : logits) peak = std::max(peak, v);
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

double cross_entropy(std::size_t true_index, const RealVector& p_hat) {
    return -std::log(std::max(p_hat[true_index], 1e-30));
}

double cross_entropy(const RealVector& p_true, const RealVector& p_hat) {
    if (p_true.size() != p_hat.size())
        throw std::invalid_argument("cross_entropy: dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < p_true.size(); ++k)
        if (p_true[k] != 0.0) acc -= p_true[k] * std::log(std::max(p_hat[k], 1e-30));
    return acc;
}

void softmax_ce_backward(const SoftmaxParams& p, const RealVector& h, const RealVector& p_hat,
                         std::size_t true_index, double scale, SoftmaxParams& grads,
                         RealVector& d_h) {
    const std::size_t m = p.M();
    for (std::size_t i = 0; i < m; ++i) {
        const double du = scale * (p_hat[i] - (i == true_index ? 1.0 : 0.0));
        double* gw = grads.w.row(i);
        const double* wr = p.w.row(i);
        for (std::size_t j = 0; j < h.size(); ++j) {
            gw[j] += du * h[j];
            d_h[j] += wr[j] * du;
        }
    }
}

void adam_step(AdamState& st, RealVector& params, const RealVector& grads) {
    if (params.size() != st.m.size() || grads.size() != st.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    for (double g : grads)
        if (!std::isfinite(g))
            throw std::runtime_error("adam_step: non-finite gradient component");

    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        st.m[k] = st.cfg.beta1 * st.m[k] + (1.0 - st.cfg.beta1) * g;
        st.v[k] = st.cfg.beta2 * st.v[k] + (1.0 - st.cfg.beta2) * g * g;
        const double m_hat = st.m[k] / bc1;
        const double v_hat = st.v[k] / bc2;
        params[k] -= st.cfg.lr * m_hat / (std::sqrt(v_hat) + st.cfg.eps);
    }
}

}  // namespace mimo
