// Synthetic data generation: i.i.d. Rayleigh and Kronecker-correlated
// channels, AWGN calibrated to a target SNR, imperfect-CSI perturbation and
// batch sampling. All draws go through Rng so a run is reproducible from one
// 64-bit seed; parallel workers fork independent streams.

#ifndef MIMOLAB_CHANNEL_HPP
#define MIMOLAB_CHANNEL_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "mimolab/linalg.hpp"
#include "mimolab/modem.hpp"

namespace mimo {

/// splitmix64; also used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// mt19937_64 core (engine output is pinned by the standard) with explicit
/// uniform/normal transforms, so sequences are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform01() {  // [0, 1), 53-bit resolution
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    std::uint32_t uniform_index(std::uint32_t n);  // {0, ..., n-1}
    double normal();                               // standard normal, Box-Muller

    /// Independent stream derived from (this seed, stream id).
    Rng fork(std::uint64_t stream) const {
        return Rng(mix64(seed_ + 0x9E3779B97F4A7C15ull * (stream + 1)));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

enum class ChannelModel { Iid, Kronecker };

struct ChannelConfig {
    std::size_t n_t = 4;
    std::size_t n_r = 4;
    ChannelModel model = ChannelModel::Iid;
    double alpha = 0.0;          // transmit correlation, Kronecker only
    double csi_error_var = 0.0;  // sigma_e^2, complex entrywise
    double snr_min_db = 2.0;
    double snr_max_db = 8.0;
    bool force_noiseless = false;  // diagnostic hook, not part of any file schema

    void validate() const;  // throws std::invalid_argument
};

/// One detection instance, already QL-transformed on the detector-side
/// channel estimate.
struct ChannelSample {
    RealVector s;                    // 2 n_t true symbols
    std::vector<std::uint32_t> s_idx;  // alphabet indices of s
    RealMatrix H;                    // 2 n_r x 2 n_t true channel (real model)
    RealMatrix H_hat;                // channel handed to the detector
    RealVector y;                    // 2 n_r observation
    double noise_var = 0.0;          // per real component
    double snr_db = 0.0;
    QLFactors ql;                    // of H_hat
    RealVector y_tilde;              // Q^T y
};

ComplexMatrix sample_iid_channel(const ChannelConfig& cfg, Rng& rng);
ComplexMatrix sample_kronecker_channel(const ChannelConfig& cfg, Rng& rng);

/// Transmit-side correlation matrix with unit diagonal and constant
/// off-diagonal alpha, and its symmetric square root.
RealMatrix transmit_correlation(std::size_t n_t, double alpha);

/// Per-real-component noise variance v such that E||Hs||^2 / E||n||^2 equals
/// 10^(snr_db/10) for this H, with symbol variance taken from c.
double noise_var_for_snr(const RealMatrix& h, const Constellation& c, double snr_db);

/// Caches the correlation square root so batch generation does not redo the
/// eigendecomposition per sample.
class ChannelGenerator {
public:
    ChannelGenerator(ChannelConfig cfg, Constellation c);

    ChannelSample generate(Rng& rng) const;
    std::vector<ChannelSample> generate_batch(Rng& rng, std::size_t b) const;

    /// Same distribution of (s, y, noise) but the complex channel is fixed to
    /// `hc` for every sample (fixed-channel training scenario).
    ChannelSample generate_with_channel(const ComplexMatrix& hc, Rng& rng) const;

    const ChannelConfig& config() const { return cfg_; }
    const Constellation& constellation() const { return c_; }

private:
    ChannelConfig cfg_;
    Constellation c_;
    RealMatrix rt_sqrt_;  // empty for iid

    ComplexMatrix draw_channel(Rng& rng) const;
    bool try_assemble(const ComplexMatrix& hc, Rng& rng, ChannelSample& smp) const;
};

ChannelSample generate_sample(const ChannelConfig& cfg, const Constellation& c, Rng& rng);
std::vector<ChannelSample> generate_batch(const ChannelConfig& cfg, const Constellation& c,
                                          Rng& rng, std::size_t b);

}  // namespace mimo

#endif
