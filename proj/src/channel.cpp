#include "mimolab/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mimo {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint32_t Rng::uniform_index(std::uint32_t n) {
    // rejection-free for our tiny n; bias is < n / 2^53
    return static_cast<std::uint32_t>(uniform01() * n);
}

double Rng::normal() {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void ChannelConfig::validate() const {
    if (n_t < 1 || n_r < 1)
        throw std::invalid_argument("channel: n_t and n_r must be >= 1");
    if (n_r < n_t)
        throw std::invalid_argument("channel: n_r >= n_t required (QL needs rows >= cols)");
    if (model == ChannelModel::Kronecker && !(alpha >= 0.0 && alpha < 1.0))
        throw std::invalid_argument("channel: alpha must be in [0, 1)");
    if (csi_error_var < 0.0)
        throw std::invalid_argument("channel: csi_error_var must be >= 0");
    if (snr_min_db > snr_max_db)
        throw std::invalid_argument("channel: snr_min_db > snr_max_db");
}

ComplexMatrix sample_iid_channel(const ChannelConfig& cfg, Rng& rng) {
    // Re/Im each N(0, 1/2): total complex entry variance 1.
    const double sd = 1.0 / std::sqrt(2.0);
    ComplexMatrix h(cfg.n_r, cfg.n_t);
    for (auto& e : h.data) e = Complex(sd * rng.normal(), sd * rng.normal());
    return h;
}

RealMatrix transmit_correlation(std::size_t n_t, double alpha) {
    RealMatrix rt(n_t, n_t, alpha);
    for (std::size_t i = 0; i < n_t; ++i) rt(i, i) = 1.0;
    return rt;
}

namespace {

// H_w * Rt^{1/2} with real Rt^{1/2}, applied to the complex matrix.
ComplexMatrix right_multiply_real(const ComplexMatrix& a, const RealMatrix& b) {
    ComplexMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const Complex aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

}  // namespace

ComplexMatrix sample_kronecker_channel(const ChannelConfig& cfg, Rng& rng) {
    cfg.validate();
    const RealMatrix rt_sqrt = spd_sqrt(transmit_correlation(cfg.n_t, cfg.alpha));
    ComplexMatrix hw = sample_iid_channel(cfg, rng);
    return right_multiply_real(hw, rt_sqrt);  // R_r = I
}

double noise_var_for_snr(const RealMatrix& h, const Constellation& c, double snr_db) {
    const double hf2 = frobenius_norm(h) * frobenius_norm(h);
    if (hf2 == 0.0) throw std::invalid_argument("noise_var_for_snr: zero channel");
    const double snr = std::pow(10.0, snr_db / 10.0);
    return hf2 * c.symbol_variance() / (static_cast<double>(h.rows) * snr);
}

ChannelGenerator::ChannelGenerator(ChannelConfig cfg, Constellation c)
    : cfg_(std::move(cfg)), c_(std::move(c)) {
    cfg_.validate();
    if (cfg_.model == ChannelModel::Kronecker)
        rt_sqrt_ = spd_sqrt(transmit_correlation(cfg_.n_t, cfg_.alpha));
}

ComplexMatrix ChannelGenerator::draw_channel(Rng& rng) const {
    ComplexMatrix hw = sample_iid_channel(cfg_, rng);
    if (cfg_.model == ChannelModel::Kronecker) return right_multiply_real(hw, rt_sqrt_);
    return hw;
}

// One attempt: draws s, snr, noise and (optionally) the CSI perturbation.
// Returns false when the QL of H_hat flags rank deficiency.
bool ChannelGenerator::try_assemble(const ComplexMatrix& hc, Rng& rng,
                                    ChannelSample& smp) const {
    const std::size_t dim_s = 2 * cfg_.n_t;
    const std::size_t dim_y = 2 * cfg_.n_r;

    smp.H = complex_to_real_matrix(hc);

    smp.s_idx.resize(dim_s);
    smp.s.resize(dim_s);
    for (std::size_t i = 0; i < dim_s; ++i) {
        smp.s_idx[i] = rng.uniform_index(static_cast<std::uint32_t>(c_.M));
        smp.s[i] = c_.alphabet[smp.s_idx[i]];
    }

    smp.snr_db = rng.uniform(cfg_.snr_min_db, cfg_.snr_max_db);
    smp.noise_var = cfg_.force_noiseless ? 0.0 : noise_var_for_snr(smp.H, c_, smp.snr_db);

    smp.y = matvec(smp.H, smp.s);
    const double noise_sd = std::sqrt(smp.noise_var);
    for (std::size_t i = 0; i < dim_y; ++i) smp.y[i] += noise_sd * rng.normal();

    if (cfg_.csi_error_var > 0.0) {
        const double esd = std::sqrt(cfg_.csi_error_var / 2.0);
        ComplexMatrix hc_hat = hc;
        for (auto& e : hc_hat.data) e += Complex(esd * rng.normal(), esd * rng.normal());
        smp.H_hat = complex_to_real_matrix(hc_hat);
    } else {
        smp.H_hat = smp.H;
    }

    smp.ql = ql_decompose(smp.H_hat);
    if (smp.ql.rank_deficient) return false;
    smp.y_tilde = rotate_observation(smp.ql.Q, smp.y);
    return true;
}

ChannelSample ChannelGenerator::generate_with_channel(const ComplexMatrix& hc, Rng& rng) const {
    ChannelSample smp;
    // With CSI error the perturbation can be redrawn; without it a deficient
    // fixed channel cannot be repaired.
    const int attempts = cfg_.csi_error_var > 0.0 ? 100 : 1;
    for (int i = 0; i < attempts; ++i)
        if (try_assemble(hc, rng, smp)) return smp;
    throw std::runtime_error("generate_with_channel: channel estimate is rank deficient");
}

ChannelSample ChannelGenerator::generate(Rng& rng) const {
    ChannelSample smp;
    for (int rejections = 0; rejections <= 100; ++rejections) {
        ComplexMatrix hc = draw_channel(rng);
        if (try_assemble(hc, rng, smp)) return smp;
    }
    throw std::runtime_error(
        "generate_sample: exceeded 100 rank-deficient channel rejections (n_t=" +
        std::to_string(cfg_.n_t) + ", n_r=" + std::to_string(cfg_.n_r) + ")");
}

std::vector<ChannelSample> ChannelGenerator::generate_batch(Rng& rng, std::size_t b) const {
    if (b < 1) throw std::invalid_argument("generate_batch: b must be >= 1");
    std::vector<ChannelSample> out;
    out.reserve(b);
    for (std::size_t i = 0; i < b; ++i) out.push_back(generate(rng));
    return out;
}

ChannelSample generate_sample(const ChannelConfig& cfg, const Constellation& c, Rng& rng) {
    return ChannelGenerator(cfg, c).generate(rng);
}

std::vector<ChannelSample> generate_batch(const ChannelConfig& cfg, const Constellation& c,
                                          Rng& rng, std::size_t b) {
    return ChannelGenerator(cfg, c).generate_batch(rng, b);
}

}  // namespace mimo
