#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mimolab/channel.hpp"
#include "mimolab/classic.hpp"

using namespace mimo;

namespace {

ChannelGenerator qpsk_gen(double snr_db, bool noiseless = false) {
    ChannelConfig cfg;
    cfg.n_t = 4;
    cfg.n_r = 4;
    cfg.snr_min_db = snr_db;
    cfg.snr_max_db = snr_db;
    cfg.force_noiseless = noiseless;
    return ChannelGenerator(cfg, make_constellation(Modulation::QPSK));
}

// Gauss-Jordan oracle for the normal equations, independent of the QL path.
RealVector solve_dense_oracle(RealMatrix a, RealVector b) {
    const std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            std::swap(b[col], b[pivot]);
        }
        const double d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) a(col, j) /= d;
        b[col] /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    return b;
}

RealVector pseudo_inverse_oracle(const RealMatrix& h, const RealVector& y) {
    const std::size_t n = h.cols;
    RealMatrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < h.rows; ++r) acc += h(r, i) * h(r, j);
            gram(i, j) = acc;
        }
    return solve_dense_oracle(gram, matvec_transposed(h, y));
}

}  // namespace

TEST_CASE("zf recovers the signal exactly without noise") {
    const ChannelGenerator gen = qpsk_gen(0.0, true);
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        CHECK(zf_detect(smp.H_hat, smp.y, gen.constellation()) == smp.s);
    }
}

TEST_CASE("zf on the identity channel is plain slicing") {
    const Constellation c = make_constellation(Modulation::QPSK);
    const RealVector y = {0.3, -0.9};
    CHECK(zf_detect(identity(2), y, c) == slice_to_alphabet(c, y));
}

TEST_CASE("zf agrees with the normal-equations oracle") {
    const ChannelGenerator gen = qpsk_gen(8.0);
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        const RealVector mine = least_squares_estimate(smp.ql, smp.y_tilde);
        const RealVector oracle = pseudo_inverse_oracle(smp.H_hat, smp.y);
        for (std::size_t i = 0; i < mine.size(); ++i)
            CHECK(std::fabs(mine[i] - oracle[i]) <= 1e-8 * std::max(1.0, std::fabs(oracle[i])));
        CHECK(zf_detect(smp.H_hat, smp.y, gen.constellation()) ==
              slice_to_alphabet(gen.constellation(), oracle));
    }
}

TEST_CASE("zf rejects rank-deficient channels") {
    Rng rng(3);
    RealMatrix h(4, 2);
    for (double& e : h.data) e = rng.normal();
    for (std::size_t i = 0; i < 4; ++i) h(i, 1) = 2.0 * h(i, 0);
    CHECK_THROWS_AS(zf_detect(h, {1.0, 2.0, 3.0, 4.0}, make_constellation(Modulation::QPSK)),
                    std::runtime_error);
}

TEST_CASE("mmse with zero noise variance equals zf") {
    const ChannelGenerator gen = qpsk_gen(10.0);
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        CHECK(mmse_detect(smp.H_hat, smp.y, gen.constellation(), 0.0) ==
              zf_detect(smp.H_hat, smp.y, gen.constellation()));
    }
}

TEST_CASE("mmse matches an independent regularized solve") {
    ChannelConfig cfg;
    cfg.n_t = 4;
    cfg.n_r = 4;
    cfg.snr_min_db = 6.0;
    cfg.snr_max_db = 6.0;
    const Constellation c = make_constellation(Modulation::QAM16);
    const ChannelGenerator gen(cfg, c);
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        const std::size_t n = smp.H_hat.cols;
        RealMatrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t r = 0; r < smp.H_hat.rows; ++r)
                    acc += smp.H_hat(r, i) * smp.H_hat(r, j);
                a(i, j) = acc;
            }
        for (std::size_t i = 0; i < n; ++i) a(i, i) += smp.noise_var / c.symbol_variance();
        const RealVector oracle =
            solve_dense_oracle(a, matvec_transposed(smp.H_hat, smp.y));
        const RealVector est = mmse_estimate(smp.H_hat, smp.y, c, smp.noise_var);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(est[i] - oracle[i]) <= 1e-10);
    }
}

TEST_CASE("mmse with huge noise variance collapses toward the origin") {
    const ChannelGenerator gen = qpsk_gen(4.0);
    const Constellation& c = gen.constellation();
    Rng rng(6);
    const ChannelSample smp = gen.generate(rng);
    const RealVector est = mmse_estimate(smp.H_hat, smp.y, c, 1e16);
    for (double e : est) CHECK(std::fabs(e) <= 1e-10);
    // slicing a zero estimate lands on an innermost level
    const RealVector det = mmse_detect(smp.H_hat, smp.y, c, 1e16);
    for (double e : det)
        CHECK((e == c.alphabet[c.M / 2 - 1] || e == c.alphabet[c.M / 2]));
}

TEST_CASE("zfdf recovers exactly without noise") {
    const ChannelGenerator gen = qpsk_gen(0.0, true);
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        CHECK(zfdf_detect(smp.ql, smp.y_tilde, gen.constellation()) == smp.s);
    }
}

TEST_CASE("zfdf on a diagonal L is per-component slicing") {
    const Constellation c = make_constellation(Modulation::QAM16);
    QLFactors ql;
    ql.Q = identity(4);
    ql.L = identity(4);
    ql.L(0, 0) = 2.0;
    ql.L(2, 2) = 0.5;
    const RealVector y_tilde = {0.9, -0.2, 0.3, 1.4};
    RealVector expected(4);
    for (std::size_t i = 0; i < 4; ++i)
        expected[i] = slice_to_alphabet(c, {y_tilde[i] / ql.L(i, i)})[0];
    CHECK(zfdf_detect(ql, y_tilde, c) == expected);
}

TEST_CASE("zfdf equals greedy per-level enumeration") {
    const ChannelGenerator gen = qpsk_gen(4.0);
    const Constellation& c = gen.constellation();
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        const RealVector got = zfdf_detect(smp.ql, smp.y_tilde, c);
        RealVector prefix;
        for (std::size_t k = 0; k < got.size(); ++k) {
            double best = c.alphabet[0];
            double best_f = branch_metric(smp.ql.L, smp.y_tilde, prefix, k, c.alphabet[0]);
            for (std::size_t i = 1; i < c.M; ++i) {
                const double f = branch_metric(smp.ql.L, smp.y_tilde, prefix, k, c.alphabet[i]);
                if (f < best_f) {
                    best_f = f;
                    best = c.alphabet[i];
                }
            }
            CHECK(got[k] == best);
            prefix.push_back(got[k]);
        }
    }
}

TEST_CASE("mld recovers exactly without noise") {
    const ChannelGenerator gen = qpsk_gen(0.0, true);
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        CHECK(mld_detect(smp.H_hat, smp.y, gen.constellation()) == smp.s);
    }
}

TEST_CASE("mld on a 1x1 complex system matches hand enumeration") {
    const Constellation c = make_constellation(Modulation::QPSK);
    ChannelConfig cfg;
    cfg.n_t = 1;
    cfg.n_r = 1;
    cfg.snr_min_db = 3.0;
    cfg.snr_max_db = 3.0;
    const ChannelGenerator gen(cfg, c);
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        double best = std::numeric_limits<double>::infinity();
        RealVector best_s;
        for (std::size_t i = 0; i < c.M; ++i)
            for (std::size_t j = 0; j < c.M; ++j) {
                const RealVector cand = {c.alphabet[i], c.alphabet[j]};
                const double obj = residual_metric(smp.y, smp.H_hat, cand);
                if (obj < best) {
                    best = obj;
                    best_s = cand;
                }
            }
        CHECK(mld_detect(smp.H_hat, smp.y, c) == best_s);
    }
}

TEST_CASE("mld objective dominates zf") {
    const ChannelGenerator gen = qpsk_gen(2.0);
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        const double mld_obj = residual_metric(
            smp.y, smp.H_hat, mld_detect(smp.H_hat, smp.y, gen.constellation()));
        const double zf_obj = residual_metric(
            smp.y, smp.H_hat, zf_detect(smp.H_hat, smp.y, gen.constellation()));
        CHECK(mld_obj <= zf_obj);
    }
}

TEST_CASE("mld refuses searches beyond the budget") {
    const ChannelGenerator gen = qpsk_gen(2.0);
    Rng rng(12);
    const ChannelSample smp = gen.generate(rng);
    CHECK_THROWS_WITH_AS(mld_detect(smp.H_hat, smp.y, gen.constellation(), 100),
                         doctest::Contains("budget"), std::runtime_error);
}

TEST_CASE("sphere decoder equals mld on random noisy instances") {
    const Constellation c = make_constellation(Modulation::QPSK);
    ChannelConfig cfg;
    cfg.n_t = 4;
    cfg.n_r = 4;
    cfg.snr_min_db = 0.0;
    cfg.snr_max_db = 10.0;
    const ChannelGenerator gen(cfg, c);
    Rng rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        const RealVector sd = sphere_detect(smp.ql, smp.y_tilde, c);
        const RealVector ml = mld_detect(smp.H_hat, smp.y, c);
        CHECK(residual_metric(smp.y, smp.H_hat, sd) == residual_metric(smp.y, smp.H_hat, ml));
        CHECK(sd == ml);
    }
}

TEST_CASE("sphere decoder prunes immediately in the noiseless case") {
    const ChannelGenerator gen = qpsk_gen(0.0, true);
    const Constellation& c = gen.constellation();
    Rng rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        SphereStats stats;
        CHECK(sphere_detect(smp.ql, smp.y_tilde, c, &stats) == smp.s);
        CHECK(stats.nodes_visited <= 2 * 4 * c.M);
    }
}

TEST_CASE("sphere decoder on a two-level toy equals exhaustive search") {
    const Constellation c = make_constellation(Modulation::QPSK);
    ChannelConfig cfg;
    cfg.n_t = 1;
    cfg.n_r = 1;
    cfg.snr_min_db = 0.0;
    cfg.snr_max_db = 0.0;
    const ChannelGenerator gen(cfg, c);
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const ChannelSample smp = gen.generate(rng);
        CHECK(sphere_detect(smp.ql, smp.y_tilde, c) == mld_detect(smp.H_hat, smp.y, c));
    }
}

TEST_CASE("sphere decoder rejects degenerate diagonals") {
    const Constellation c = make_constellation(Modulation::QPSK);
    QLFactors ql;
    ql.Q = identity(2);
    ql.L = identity(2);
    ql.L(1, 1) = 0.0;
    CHECK_THROWS_AS(sphere_detect(ql, {0.1, 0.2}, c), std::runtime_error);
    CHECK_THROWS_AS(zfdf_detect(ql, {0.1, 0.2}, c), std::runtime_error);
}
