#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace drccmdp {

using prec_t = double;
using vec = std::vector<prec_t>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, prec_t fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    prec_t& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    prec_t operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    prec_t* data() { return data_.data(); }
    const prec_t* data() const { return data_.data(); }
    prec_t* row(std::size_t i) { return data_.data() + i * cols_; }
    const prec_t* row(std::size_t i) const { return data_.data() + i * cols_; }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    /// y = A x
    void multiply(const vec& x, vec& y) const;
    /// y = A^T x
    void multiply_transposed(const vec& x, vec& y) const;

    Matrix transposed() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    vec data_;
};

/// C += A * B (all dense, row-major), tiled and threaded.
void gemm_accum(const Matrix& a, const Matrix& b, Matrix& c);

/// In-place lower Cholesky factorization. Throws std::runtime_error if the
/// matrix is not positive definite (pivot below tol * max diagonal).
void cholesky_inplace(Matrix& a, prec_t tol = 1e-14);

/// Solves L L^T x = b given the lower factor from cholesky_inplace.
void cholesky_solve(const Matrix& l, vec& b);

/// Factorization context for symmetric quasi-definite KKT matrices
///   [ H  A^T ]
///   [ A  -E  ]
/// with H positive definite on the first n_plus coordinates and -E negative
/// definite on the rest. Factored as L D L^T without pivoting, which is
/// stable for quasi-definite matrices under static regularization.
class LdltKkt {
public:
    /// Factors the matrix in place; diag_sign[i] = +1 for the H block rows,
    /// -1 for the E block rows. reg is added (with the row sign) before
    /// factorization.
    void factor(Matrix&& kkt, const std::vector<int>& diag_sign, prec_t reg);

    /// Solves K x = b using the stored factor; b is overwritten by x.
    void solve(vec& b) const;

    /// One step of iterative refinement against the (regularized) matrix is
    /// not possible after the in-place factor; callers keep their own copy of
    /// K when refinement is wanted.
    std::size_t dim() const { return n_; }

private:
    Matrix lf_;       // unit-lower factor with D on the diagonal
    std::size_t n_ = 0;
};

/// Symmetric eigendecomposition (Householder tridiagonalization + implicit
/// QL). a is destroyed; on return eigvecs columns hold eigenvectors and
/// eigvals the ascending eigenvalues.
void symmetric_eigen(Matrix a, vec& eigvals, Matrix& eigvecs);

prec_t dot(const vec& a, const vec& b);
prec_t norm2(const vec& a);

}  // namespace drccmdp
