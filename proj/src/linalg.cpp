#include "drccmdp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <thread>

namespace drccmdp {

void Matrix::multiply(const vec& x, vec& y) const {
    if (x.size() != cols_) throw std::invalid_argument("Matrix::multiply: size mismatch");
    y.assign(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const prec_t* r = row(i);
        prec_t acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
}

void Matrix::multiply_transposed(const vec& x, vec& y) const {
    if (x.size() != rows_) throw std::invalid_argument("Matrix::multiply_transposed: size mismatch");
    y.assign(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const prec_t* r = row(i);
        const prec_t xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < cols_; ++j) y[j] += xi * r[j];
    }
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

namespace {

// C[i0:i1, :] += A[i0:i1, kk] * B[kk, :], row-major, B already transposed to
// kk-major so the innermost loop runs contiguously.
void gemm_rows(const prec_t* a, std::size_t lda, const prec_t* b, std::size_t ldb,
               prec_t* c, std::size_t ldc, std::size_t i0, std::size_t i1,
               std::size_t kk, std::size_t ncols) {
    constexpr std::size_t KB = 4;
    for (std::size_t i = i0; i < i1; ++i) {
        const prec_t* ar = a + i * lda;
        prec_t* cr = c + i * ldc;
        std::size_t p = 0;
        for (; p + KB <= kk; p += KB) {
            const prec_t a0 = ar[p], a1 = ar[p + 1], a2 = ar[p + 2], a3 = ar[p + 3];
            const prec_t* b0 = b + p * ldb;
            const prec_t* b1 = b0 + ldb;
            const prec_t* b2 = b1 + ldb;
            const prec_t* b3 = b2 + ldb;
            for (std::size_t j = 0; j < ncols; ++j)
                cr[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < kk; ++p) {
            const prec_t ap = ar[p];
            const prec_t* br = b + p * ldb;
            for (std::size_t j = 0; j < ncols; ++j) cr[j] += ap * br[j];
        }
    }
}

void run_split(std::size_t i0, std::size_t i1, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t total = i1 - i0;
    if (total < 64) {
        body(i0, i1);
        return;
    }
    const std::size_t mid = i0 + total / 2;
    std::thread t([&] { body(i0, mid); });
    body(mid, i1);
    t.join();
}

}  // namespace

void gemm_accum(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
        throw std::invalid_argument("gemm_accum: shape mismatch");
    run_split(0, a.rows(), [&](std::size_t i0, std::size_t i1) {
        gemm_rows(a.data(), a.cols(), b.data(), b.cols(), c.data(), c.cols(), i0, i1,
                  a.cols(), b.cols());
    });
}

void cholesky_inplace(Matrix& a, prec_t tol) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("cholesky: not square");
    prec_t maxd = 0.0;
    for (std::size_t i = 0; i < n; ++i) maxd = std::max(maxd, std::abs(a(i, i)));
    for (std::size_t k = 0; k < n; ++k) {
        prec_t d = a(k, k);
        const prec_t* rk = a.row(k);
        for (std::size_t j = 0; j < k; ++j) d -= rk[j] * rk[j];
        if (d <= tol * std::max<prec_t>(maxd, 1.0))
            throw std::runtime_error("cholesky: matrix not positive definite");
        d = std::sqrt(d);
        a(k, k) = d;
        const prec_t inv = 1.0 / d;
        for (std::size_t i = k + 1; i < n; ++i) {
            prec_t s = a(i, k);
            const prec_t* ri = a.row(i);
            for (std::size_t j = 0; j < k; ++j) s -= ri[j] * rk[j];
            a(i, k) = s * inv;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = 0.0;
}

void cholesky_solve(const Matrix& l, vec& b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw std::invalid_argument("cholesky_solve: size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        prec_t s = b[i];
        const prec_t* ri = l.row(i);
        for (std::size_t j = 0; j < i; ++j) s -= ri[j] * b[j];
        b[i] = s / ri[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        prec_t s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * b[j];
        b[ii] = s / l(ii, ii);
    }
}

void LdltKkt::factor(Matrix&& kkt, const std::vector<int>& diag_sign, prec_t reg) {
    const std::size_t n = kkt.rows();
    if (kkt.cols() != n || diag_sign.size() != n)
        throw std::invalid_argument("LdltKkt::factor: shape mismatch");
    lf_ = std::move(kkt);
    n_ = n;
    Matrix& a = lf_;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += diag_sign[i] * reg;

    constexpr std::size_t NB = 48;
    vec w;  // scaled panel, transposed to panel-major
    for (std::size_t k0 = 0; k0 < n; k0 += NB) {
        const std::size_t k1 = std::min(k0 + NB, n);
        // unblocked factorization of the panel columns [k0, k1)
        for (std::size_t k = k0; k < k1; ++k) {
            prec_t d = a(k, k);
            const prec_t* rk = a.row(k);
            for (std::size_t j = k0; j < k; ++j) d -= rk[j] * rk[j] * a(j, j);
            if (std::abs(d) < 1e-30) d = (diag_sign[k] >= 0 ? 1e-30 : -1e-30);
            a(k, k) = d;
            const prec_t inv = 1.0 / d;
            for (std::size_t i = k + 1; i < n; ++i) {
                prec_t s = a(i, k);
                const prec_t* ri = a.row(i);
                for (std::size_t j = k0; j < k; ++j) s -= ri[j] * rk[j] * a(j, j);
                a(i, k) = s * inv;
            }
        }
        if (k1 == n) break;
        // trailing update: A[k1:, k1:] -= L[k1:, k0:k1] * D * L[k1:, k0:k1]^T
        const std::size_t nb = k1 - k0;
        const std::size_t nt = n - k1;
        w.assign(nb * nt, 0.0);
        for (std::size_t p = 0; p < nb; ++p) {
            const prec_t dp = a(k0 + p, k0 + p);
            prec_t* wr = w.data() + p * nt;
            for (std::size_t i = 0; i < nt; ++i) wr[i] = -dp * a(k1 + i, k0 + p);
        }
        prec_t* adata = a.data();
        const std::size_t lda = a.cols();
        run_split(0, nt, [&](std::size_t i0, std::size_t i1) {
            // lower triangle only; full tile rows are cheap enough to fill
            constexpr std::size_t KB = 4;
            for (std::size_t i = i0; i < i1; ++i) {
                const prec_t* ar = adata + (k1 + i) * lda + k0;
                prec_t* cr = adata + (k1 + i) * lda + k1;
                const std::size_t jn = i + 1;  // columns [k1, k1+i]
                std::size_t p = 0;
                for (; p + KB <= nb; p += KB) {
                    const prec_t a0 = ar[p], a1 = ar[p + 1], a2 = ar[p + 2], a3 = ar[p + 3];
                    const prec_t* b0 = w.data() + p * nt;
                    const prec_t* b1 = b0 + nt;
                    const prec_t* b2 = b1 + nt;
                    const prec_t* b3 = b2 + nt;
                    for (std::size_t j = 0; j < jn; ++j)
                        cr[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
                }
                for (; p < nb; ++p) {
                    const prec_t ap = ar[p];
                    const prec_t* br = w.data() + p * nt;
                    for (std::size_t j = 0; j < jn; ++j) cr[j] += ap * br[j];
                }
            }
        });
    }
}

void LdltKkt::solve(vec& b) const {
    const std::size_t n = n_;
    if (b.size() != n) throw std::invalid_argument("LdltKkt::solve: size mismatch");
    const Matrix& l = lf_;
    for (std::size_t i = 0; i < n; ++i) {
        prec_t s = b[i];
        const prec_t* ri = l.row(i);
        for (std::size_t j = 0; j < i; ++j) s -= ri[j] * b[j];
        b[i] = s;
    }
    for (std::size_t i = 0; i < n; ++i) b[i] /= l(i, i);
    for (std::size_t ii = n; ii-- > 0;) {
        prec_t s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * b[j];
        b[ii] = s;
    }
}

namespace {

// Householder reduction to tridiagonal form (tred2) followed by implicit QL
// with Wilkinson shifts (tql2); both are the classical EISPACK procedures.
void tred2(Matrix& z, vec& d, vec& e) {
    const std::size_t n = z.rows();
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (std::size_t i = n - 1; i >= 1; --i) {
        std::size_t l = i - 1;
        prec_t h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                prec_t f = z(i, l);
                prec_t g = (f >= 0.0 ? -std::sqrt(h) : std::sqrt(h));
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const prec_t hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                prec_t g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
                for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
    }
}

void tql2(vec& d, vec& e, Matrix& z) {
    const std::size_t n = d.size();
    if (n == 0) return;
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        std::size_t iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const prec_t dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (iter++ == 120) throw std::runtime_error("symmetric_eigen: no convergence");
                prec_t g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                prec_t r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0 ? std::abs(r) : -std::abs(r)));
                prec_t s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    prec_t f = s * e[i];
                    const prec_t b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * f;
                        z(k, i) = c * z(k, i) - s * f;
                    }
                }
                if (r == 0.0 && m > l + 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    // sort ascending, carrying eigenvectors
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t k = i;
        for (std::size_t j = i + 1; j < n; ++j)
            if (d[j] < d[k]) k = j;
        if (k != i) {
            std::swap(d[i], d[k]);
            for (std::size_t r = 0; r < n; ++r) std::swap(z(r, i), z(r, k));
        }
    }
}

}  // namespace

void symmetric_eigen(Matrix a, vec& eigvals, Matrix& eigvecs) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("symmetric_eigen: not square");
    for (std::size_t i = 0; i < n * n; ++i)
        if (!std::isfinite(a.data()[i]))
            throw std::runtime_error("symmetric_eigen: non-finite input");
    if (n == 0) {
        eigvals.clear();
        eigvecs = Matrix();
        return;
    }
    if (n == 1) {
        eigvals = {a(0, 0)};
        eigvecs = Matrix(1, 1, 1.0);
        return;
    }
    vec e;
    tred2(a, eigvals, e);
    tql2(eigvals, e, a);
    eigvecs = std::move(a);
}

prec_t dot(const vec& a, const vec& b) {
    prec_t s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

prec_t norm2(const vec& a) { return std::sqrt(dot(a, a)); }

}  // namespace drccmdp
