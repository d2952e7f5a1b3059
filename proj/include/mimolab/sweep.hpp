// BER benchmarking: per-(detector, SNR) Monte Carlo with an error-count
// stopping rule, a paired evaluator that runs several detectors on one
// common sample stream, and CSV emission.

#ifndef MIMOLAB_SWEEP_HPP
#define MIMOLAB_SWEEP_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mimolab/config.hpp"
#include "mimolab/lisa.hpp"

namespace mimo {

struct BerPoint {
    double snr_db = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    std::uint64_t seed = 0;   // derived per-point stream seed
    bool censored = false;    // bit cap reached before min_errors
};

struct BerCurve {
    std::string detector;
    std::vector<BerPoint> points;
};

struct SweepOptions {
    const LisaModel* lisa = nullptr;  // required when "lisa" is in the detector list
    bool force_noiseless = false;     // diagnostic hook
    std::uint64_t bit_cap = 10000000;
    int threads = 1;
};

/// For each (detector, snr) pair, simulates fresh samples until min_bits and
/// min_errors are both met or bit_cap is hit (censored). Deterministic under
/// the config seed regardless of thread count.
std::vector<BerCurve> run_ber_sweep(const ExperimentConfig& cfg, const SweepOptions& opt);

/// Runs every detector on the same generated samples at one SNR point until
/// at least min_bits bits are simulated. Paired streams make the ordering
/// comparisons and the "same bit stream" ratios well defined.
struct JointBer {
    std::string detector;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
};
std::vector<JointBer> joint_ber(const ExperimentConfig& cfg, double snr_db,
                                std::uint64_t min_bits, const SweepOptions& opt);

std::string curves_to_csv(const std::vector<BerCurve>& curves);
void export_csv(const std::vector<BerCurve>& curves, const std::string& path);
std::vector<BerCurve> parse_csv(const std::string& text);
std::vector<BerCurve> load_csv(const std::string& path);

void export_loss_trace(const std::vector<LossPoint>& trace, const std::string& path);

}  // namespace mimo

#endif
