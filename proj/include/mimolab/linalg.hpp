// Dense real/complex matrix kernels and the QL decomposition used by all
// detectors. Everything here is plain double arithmetic with value semantics;
// no hidden state, so results are bitwise reproducible for identical inputs.

#ifndef MIMOLAB_LINALG_HPP
#define MIMOLAB_LINALG_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace mimo {

using RealVector = std::vector<double>;
using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }

    bool operator==(const RealMatrix&) const = default;
};

struct ComplexMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Complex> data;  // row-major

    ComplexMatrix() = default;
    ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    Complex& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    Complex operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// H = Q * L with orthonormal Q columns and lower-triangular L, diag(L) >= 0.
/// rank_deficient is set when some |l_kk| < 1e-12 * ||H||_F; factors are still
/// returned and the caller decides whether to reject the matrix.
struct QLFactors {
    RealMatrix Q;  // m x n
    RealMatrix L;  // n x n, lower triangular, upper part exactly zero
    bool rank_deficient = false;
};

RealMatrix identity(std::size_t n);
RealMatrix transpose(const RealMatrix& a);
RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);
RealVector matvec(const RealMatrix& a, const RealVector& x);
RealVector matvec_transposed(const RealMatrix& a, const RealVector& x);  // a^T x

double dot(const RealVector& a, const RealVector& b);
double frobenius_norm(const RealMatrix& a);
double max_abs(const RealMatrix& a);

/// Columns of `a` in reverse order (used for the reversed detection order).
RealMatrix reverse_columns(const RealMatrix& a);

/// Real-valued expansion of the complex model: H = [[Re,-Im],[Im,Re]].
RealMatrix complex_to_real_matrix(const ComplexMatrix& hc);
RealVector complex_to_real_vector(const ComplexVector& v);

/// Expands (Hc, yc, sc) to the real model such that y = H s whenever yc = Hc sc.
void complex_to_real(const ComplexMatrix& hc, const ComplexVector& yc,
                     const ComplexVector& sc, RealMatrix& h, RealVector& y,
                     RealVector& s);

/// QL decomposition via Householder QR of the doubly reversed matrix.
/// Requires rows >= cols.
QLFactors ql_decompose(const RealMatrix& h);

/// y_tilde = Q^T y.
RealVector rotate_observation(const RealMatrix& q, const RealVector& y);

/// ||y - H s||_2^2
double residual_metric(const RealVector& y, const RealMatrix& h, const RealVector& s);

/// Solves L x = b for lower-triangular L. Throws on a zero diagonal entry.
RealVector forward_substitute(const RealMatrix& l, const RealVector& b);

/// Solves A x = b for symmetric positive definite A via Cholesky.
/// Throws std::runtime_error when A is not numerically positive definite.
RealVector cholesky_solve(const RealMatrix& a, const RealVector& b);

/// Eigendecomposition of a symmetric matrix (cyclic Jacobi).
/// Returns eigenvalues (ascending) and the matching orthonormal columns of V.
struct SymmetricEigen {
    RealVector values;
    RealMatrix vectors;  // column j pairs with values[j]
};
SymmetricEigen symmetric_eigen(const RealMatrix& a);

/// Symmetric positive (semi)definite square root via symmetric_eigen.
RealMatrix spd_sqrt(const RealMatrix& a);

}  // namespace mimo

#endif
