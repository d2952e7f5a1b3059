// Classical baselines: ZF, MMSE, ZF-DF, exhaustive MLD and a Schnorr-Euchner
// sphere decoder. ZF-DF and the sphere decoder walk the QL decision tree and
// share the branch-metric helper. All detectors are pure functions.

#ifndef MIMOLAB_CLASSIC_HPP
#define MIMOLAB_CLASSIC_HPP

#include <cstdint>

#include "mimolab/linalg.hpp"
#include "mimolab/modem.hpp"

namespace mimo {

/// Node state while descending the detection tree: the first `depth` symbols
/// are decided and `cumulative` is f_1 + ... + f_depth.
struct PathMetric {
    std::size_t depth = 0;
    RealVector partial_symbols;
    double cumulative = 0.0;
};

/// Branch metric f_k = (y_tilde_k - sum_{l<=k} L(k,l) s_l)^2 for the candidate
/// level `a` placed at depth k (0-based), given the decided prefix.
double branch_metric(const RealMatrix& l, const RealVector& y_tilde,
                     const RealVector& prefix, std::size_t k, double a);

RealVector zf_detect(const RealMatrix& h_hat, const RealVector& y, const Constellation& c);

/// Unsliced MMSE estimate (H^T H + (v / sigma_s^2) I)^{-1} H^T y.
RealVector mmse_estimate(const RealMatrix& h_hat, const RealVector& y, const Constellation& c,
                         double noise_var);

RealVector mmse_detect(const RealMatrix& h_hat, const RealVector& y, const Constellation& c,
                       double noise_var);

RealVector zfdf_detect(const QLFactors& ql, const RealVector& y_tilde, const Constellation& c);

/// Exhaustive search over A^n. Throws when M^n exceeds `budget` candidates.
RealVector mld_detect(const RealMatrix& h_hat, const RealVector& y, const Constellation& c,
                      std::uint64_t budget = std::uint64_t(1) << 24);

struct SphereStats {
    std::uint64_t nodes_visited = 0;  // tree descents
};

/// Depth-first Schnorr-Euchner search, infinite initial radius: exact MLD.
RealVector sphere_detect(const QLFactors& ql, const RealVector& y_tilde,
                         const Constellation& c, SphereStats* stats = nullptr);

/// Unsliced least-squares estimate L^{-1} Q^T y (shared by ZF paths).
RealVector least_squares_estimate(const QLFactors& ql, const RealVector& y_tilde);

}  // namespace mimo

#endif
