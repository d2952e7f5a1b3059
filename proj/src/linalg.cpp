#include "mimolab/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace mimo {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Reduced Householder QR, m >= n. Returns Q (m x n) and R (n x n upper).
void qr_reduced(RealMatrix a, RealMatrix& q_out, RealMatrix& r_out) {
    const std::size_t m = a.rows, n = a.cols;
    std::vector<RealVector> reflectors(n);
    std::vector<double> betas(n, 0.0);

    for (std::size_t k = 0; k < n; ++k) {
        double sigma = 0.0;
        for (std::size_t i = k; i < m; ++i) sigma += a(i, k) * a(i, k);
        sigma = std::sqrt(sigma);

        RealVector v(m - k, 0.0);
        double beta = 0.0;
        if (sigma > 0.0) {
            const double alpha = a(k, k) >= 0.0 ? -sigma : sigma;
            for (std::size_t i = k; i < m; ++i) v[i - k] = a(i, k);
            v[0] -= alpha;
            const double vtv = dot(v, v);
            if (vtv > 0.0) {
                beta = 2.0 / vtv;
                for (std::size_t j = k; j < n; ++j) {
                    double c = 0.0;
                    for (std::size_t i = k; i < m; ++i) c += v[i - k] * a(i, j);
                    c *= beta;
                    for (std::size_t i = k; i < m; ++i) a(i, j) -= c * v[i - k];
                }
                a(k, k) = alpha;  // clean up rounding in the pivot column
                for (std::size_t i = k + 1; i < m; ++i) a(i, k) = 0.0;
            }
        }
        reflectors[k] = std::move(v);
        betas[k] = beta;
    }

    r_out = RealMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) r_out(i, j) = a(i, j);

    // Accumulate Q = H_0 ... H_{n-1} [I_n; 0] by applying reflectors in reverse.
    q_out = RealMatrix(m, n);
    for (std::size_t j = 0; j < n; ++j) q_out(j, j) = 1.0;
    for (std::size_t k = n; k-- > 0;) {
        if (betas[k] == 0.0) continue;
        const RealVector& v = reflectors[k];
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t i = k; i < m; ++i) c += v[i - k] * q_out(i, j);
            c *= betas[k];
            for (std::size_t i = k; i < m; ++i) q_out(i, j) -= c * v[i - k];
        }
    }
}

}  // namespace

RealMatrix identity(std::size_t n) {
    RealMatrix e(n, n);
    for (std::size_t i = 0; i < n; ++i) e(i, i) = 1.0;
    return e;
}

RealMatrix transpose(const RealMatrix& a) {
    RealMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ");
    RealMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

RealVector matvec(const RealMatrix& a, const RealVector& x) {
    require(a.cols == x.size(), "matvec: dimension mismatch");
    RealVector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j] * x[j];
        y[i] = acc;
    }
    return y;
}

RealVector matvec_transposed(const RealMatrix& a, const RealVector& x) {
    require(a.rows == x.size(), "matvec_transposed: dimension mismatch");
    RealVector y(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += arow[j] * xi;
    }
    return y;
}

double dot(const RealVector& a, const RealVector& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double frobenius_norm(const RealMatrix& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v * v;
    return std::sqrt(acc);
}

double max_abs(const RealMatrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

RealMatrix reverse_columns(const RealMatrix& a) {
    RealMatrix r(a.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) r(i, j) = a(i, a.cols - 1 - j);
    return r;
}

RealMatrix complex_to_real_matrix(const ComplexMatrix& hc) {
    const std::size_t m = hc.rows, n = hc.cols;
    RealMatrix h(2 * m, 2 * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double re = hc(i, j).real(), im = hc(i, j).imag();
            h(i, j) = re;
            h(i, j + n) = -im;
            h(i + m, j) = im;
            h(i + m, j + n) = re;
        }
    }
    return h;
}

RealVector complex_to_real_vector(const ComplexVector& v) {
    RealVector r(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        r[i] = v[i].real();
        r[i + v.size()] = v[i].imag();
    }
    return r;
}

void complex_to_real(const ComplexMatrix& hc, const ComplexVector& yc,
                     const ComplexVector& sc, RealMatrix& h, RealVector& y,
                     RealVector& s) {
    require(hc.rows == yc.size() && hc.cols == sc.size(),
            "complex_to_real: dimension mismatch");
    h = complex_to_real_matrix(hc);
    y = complex_to_real_vector(yc);
    s = complex_to_real_vector(sc);
}

QLFactors ql_decompose(const RealMatrix& h) {
    const std::size_t m = h.rows, n = h.cols;
    require(m >= n && n > 0, "ql_decompose: requires rows >= cols >= 1");

    // Reverse rows and columns, QR-factor, reverse back: J_m H J_n = Qr Rr
    // gives H = (J_m Qr J_n)(J_n Rr J_n) with the second factor lower
    // triangular.
    RealMatrix hr(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) hr(i, j) = h(m - 1 - i, n - 1 - j);

    RealMatrix qr, rr;
    qr_reduced(std::move(hr), qr, rr);

    QLFactors f;
    f.Q = RealMatrix(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) f.Q(i, j) = qr(m - 1 - i, n - 1 - j);

    f.L = RealMatrix(n, n);  // upper part stays exactly zero
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) f.L(i, j) = rr(n - 1 - i, n - 1 - j);

    // Fix signs so diag(L) >= 0: H = (Q D)(D L) for any D = diag(+-1).
    for (std::size_t k = 0; k < n; ++k) {
        if (f.L(k, k) < 0.0) {
            for (std::size_t j = 0; j <= k; ++j) f.L(k, j) = -f.L(k, j);
            for (std::size_t i = 0; i < m; ++i) f.Q(i, k) = -f.Q(i, k);
        }
    }

    const double scale = frobenius_norm(h);
    for (std::size_t k = 0; k < n; ++k) {
        if (std::fabs(f.L(k, k)) < 1e-12 * scale) {
            f.rank_deficient = true;
            break;
        }
    }
    return f;
}

RealVector rotate_observation(const RealMatrix& q, const RealVector& y) {
    require(q.rows == y.size(), "rotate_observation: dimension mismatch");
    return matvec_transposed(q, y);
}

double residual_metric(const RealVector& y, const RealMatrix& h, const RealVector& s) {
    require(h.rows == y.size() && h.cols == s.size(),
            "residual_metric: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < h.rows; ++i) {
        const double* hrow = h.row(i);
        double r = y[i];
        for (std::size_t j = 0; j < h.cols; ++j) r -= hrow[j] * s[j];
        acc += r * r;
    }
    return acc;
}

RealVector forward_substitute(const RealMatrix& l, const RealVector& b) {
    require(l.rows == l.cols && l.rows == b.size(),
            "forward_substitute: dimension mismatch");
    const std::size_t n = l.rows;
    RealVector x(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double r = b[k];
        for (std::size_t j = 0; j < k; ++j) r -= l(k, j) * x[j];
        if (l(k, k) == 0.0)
            throw std::runtime_error("forward_substitute: zero diagonal entry");
        x[k] = r / l(k, k);
    }
    return x;
}

RealVector cholesky_solve(const RealMatrix& a, const RealVector& b) {
    require(a.rows == a.cols && a.rows == b.size(),
            "cholesky_solve: dimension mismatch");
    const std::size_t n = a.rows;
    RealMatrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (sum <= 0.0)
                    throw std::runtime_error(
                        "cholesky_solve: matrix not positive definite (singular system)");
                l(i, i) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    RealVector y = forward_substitute(l, b);
    // back substitution with L^T
    RealVector x(n, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        double r = y[k];
        for (std::size_t j = k + 1; j < n; ++j) r -= l(j, k) * x[j];
        x[k] = r / l(k, k);
    }
    return x;
}

SymmetricEigen symmetric_eigen(const RealMatrix& a_in) {
    require(a_in.rows == a_in.cols, "symmetric_eigen: matrix must be square");
    const std::size_t n = a_in.rows;
    RealMatrix a = a_in;
    RealMatrix v = identity(n);

    auto off_norm = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
        return std::sqrt(2.0 * acc);
    };

    const double tol = 1e-14 * std::max(1.0, frobenius_norm(a_in));
    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= tol / (n * n)) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    SymmetricEigen out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);

    // sort ascending, permuting the eigenvector columns to match
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (out.values[order[j]] < out.values[order[i]]) std::swap(order[i], order[j]);

    SymmetricEigen sorted;
    sorted.values.resize(n);
    sorted.vectors = RealMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        sorted.values[j] = out.values[order[j]];
        for (std::size_t i = 0; i < n; ++i) sorted.vectors(i, j) = v(i, order[j]);
    }
    return sorted;
}

RealMatrix spd_sqrt(const RealMatrix& a) {
    SymmetricEigen eig = symmetric_eigen(a);
    const std::size_t n = a.rows;
    RealMatrix out(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        if (eig.values[j] < -1e-12)
            throw std::runtime_error("spd_sqrt: matrix has a negative eigenvalue");
        const double root = std::sqrt(std::max(0.0, eig.values[j]));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                out(i, k) += root * eig.vectors(i, j) * eig.vectors(k, j);
    }
    return out;
}

}  // namespace mimo
