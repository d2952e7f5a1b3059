#include "mimolab/classic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mimo {

double branch_metric(const RealMatrix& l, const RealVector& y_tilde,
                     const RealVector& prefix, std::size_t k, double a) {
    double r = y_tilde[k];
    for (std::size_t j = 0; j < k; ++j) r -= l(k, j) * prefix[j];
    r -= l(k, k) * a;
    return r * r;
}

RealVector least_squares_estimate(const QLFactors& ql, const RealVector& y_tilde) {
    return forward_substitute(ql.L, y_tilde);
}

RealVector zf_detect(const RealMatrix& h_hat, const RealVector& y, const Constellation& c) {
    QLFactors ql = ql_decompose(h_hat);
    if (ql.rank_deficient)
        throw std::runtime_error("zf_detect: channel is rank deficient, linear system unsolvable");
    RealVector est = least_squares_estimate(ql, rotate_observation(ql.Q, y));
    return slice_to_alphabet(c, est);
}

RealVector mmse_estimate(const RealMatrix& h_hat, const RealVector& y, const Constellation& c,
                         double noise_var) {
    if (noise_var < 0.0) throw std::invalid_argument("mmse: negative noise variance");
    const std::size_t n = h_hat.cols;
    // (H^T H + (v / sigma_s^2) I) s = H^T y
    RealMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < h_hat.rows; ++r) acc += h_hat(r, i) * h_hat(r, j);
            a(i, j) = acc;
            a(j, i) = acc;
        }
    const double ridge = noise_var / c.symbol_variance();
    for (std::size_t i = 0; i < n; ++i) a(i, i) += ridge;
    return cholesky_solve(a, matvec_transposed(h_hat, y));
}

RealVector mmse_detect(const RealMatrix& h_hat, const RealVector& y, const Constellation& c,
                       double noise_var) {
    return slice_to_alphabet(c, mmse_estimate(h_hat, y, c, noise_var));
}

RealVector zfdf_detect(const QLFactors& ql, const RealVector& y_tilde, const Constellation& c) {
    const std::size_t n = ql.L.rows;
    RealVector s(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double lkk = ql.L(k, k);
        if (lkk == 0.0)
            throw std::runtime_error("zfdf_detect: zero diagonal in L, degenerate channel");
        double r = y_tilde[k];
        for (std::size_t j = 0; j < k; ++j) r -= ql.L(k, j) * s[j];
        s[k] = c.alphabet[slice_index(c, r / lkk)];
    }
    return s;
}

RealVector mld_detect(const RealMatrix& h_hat, const RealVector& y, const Constellation& c,
                      std::uint64_t budget) {
    const std::size_t n = h_hat.cols;

    double candidates = 1.0;
    for (std::size_t i = 0; i < n; ++i) candidates *= static_cast<double>(c.M);
    if (candidates > static_cast<double>(budget))
        throw std::runtime_error("mld_detect: " + std::to_string(c.M) + "^" +
                                 std::to_string(n) + " candidates exceed budget " +
                                 std::to_string(budget) +
                                 "; exhaustive search refused");

    // Odometer over alphabet indices with the last position fastest, so
    // candidates appear in lexicographic order and strict comparison keeps
    // the lexicographically smallest minimizer.
    std::vector<std::size_t> idx(n, 0);
    RealVector s(n, c.alphabet[0]);
    RealVector hs = matvec(h_hat, s);

    auto objective = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - hs[i];
            acc += r * r;
        }
        return acc;
    };

    RealVector best_s = s;
    double best = objective();

    for (;;) {
        // rightmost position with room to increment; everything after resets
        std::size_t pos = n;
        while (pos > 0 && idx[pos - 1] + 1 == c.M) --pos;
        if (pos == 0) break;
        --pos;

        const double delta = c.alphabet[idx[pos] + 1] - c.alphabet[idx[pos]];
        idx[pos] += 1;
        s[pos] += delta;
        for (std::size_t i = 0; i < h_hat.rows; ++i) hs[i] += h_hat(i, pos) * delta;
        for (std::size_t p = pos + 1; p < n; ++p) {
            const double d = c.alphabet[0] - c.alphabet[idx[p]];
            idx[p] = 0;
            s[p] += d;
            for (std::size_t i = 0; i < h_hat.rows; ++i) hs[i] += h_hat(i, p) * d;
        }

        const double obj = objective();
        if (obj < best) {
            best = obj;
            best_s = s;
        }
    }
    return best_s;
}

namespace {

struct SphereSearch {
    const RealMatrix& L;
    const RealVector& y_tilde;
    const Constellation& c;
    std::size_t n = 0;
    double radius = std::numeric_limits<double>::infinity();
    RealVector best = {};
    PathMetric path = {};
    std::uint64_t visited = 0;

    void descend() {
        const std::size_t k = path.depth;
        if (k == n) {
            if (path.cumulative < radius) {
                radius = path.cumulative;
                best = path.partial_symbols;
            }
            return;
        }
        const double lkk = L(k, k);
        double center = y_tilde[k];
        for (std::size_t j = 0; j < k; ++j) center -= L(k, j) * path.partial_symbols[j];

        // Schnorr-Euchner: children by increasing branch metric; ties keep
        // the smaller level (alphabet order).
        struct Child { double f; std::size_t idx; };
        std::vector<Child> children(c.M);
        for (std::size_t i = 0; i < c.M; ++i) {
            const double r = center - lkk * c.alphabet[i];
            children[i] = {r * r, i};
        }
        std::stable_sort(children.begin(), children.end(),
                         [](const Child& a, const Child& b) { return a.f < b.f; });

        for (const Child& ch : children) {
            if (path.cumulative + ch.f > radius) break;  // siblings only get worse
            ++visited;
            path.partial_symbols[k] = c.alphabet[ch.idx];
            path.cumulative += ch.f;
            path.depth = k + 1;
            descend();
            path.cumulative -= ch.f;
            path.depth = k;
        }
    }
};

}  // namespace

RealVector sphere_detect(const QLFactors& ql, const RealVector& y_tilde,
                         const Constellation& c, SphereStats* stats) {
    const std::size_t n = ql.L.rows;
    for (std::size_t k = 0; k < n; ++k)
        if (ql.L(k, k) <= 0.0)
            throw std::runtime_error("sphere_detect: non-positive diagonal in L");

    SphereSearch search{ql.L, y_tilde, c, n};
    search.path.partial_symbols.assign(n, 0.0);
    search.descend();
    if (stats) stats->nodes_visited = search.visited;
    return search.best;
}

}  // namespace mimo
