#include "doctest.h"

#include <cmath>

#include "drccmdp/linalg.hpp"
#include "drccmdp/rng.hpp"

using namespace drccmdp;

TEST_CASE("cholesky factors and solves an spd system") {
    const std::size_t n = 12;
    CounterRng rng(5, 0);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const prec_t v = rng.uniform01() - 0.5;
            a(i, j) = v;
            a(j, i) = v;
        }
    for (std::size_t i = 0; i < n; ++i) a(i, i) += n;
    vec x(n), b(n, 0.0);
    for (auto& v : x) v = rng.uniform01();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b[i] += a(i, j) * x[j];
    Matrix l = a;
    cholesky_inplace(l);
    cholesky_solve(l, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-10));
}

TEST_CASE("cholesky rejects indefinite matrices") {
    Matrix a(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = -1.0;
    CHECK_THROWS_AS(cholesky_inplace(a), std::runtime_error);
}

TEST_CASE("quasidefinite ldlt solves kkt systems") {
    const std::size_t np = 20, nm = 8, n = np + nm;
    CounterRng rng(9, 0);
    Matrix k(n, n);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const prec_t v = rng.uniform01() - 0.5;
            k(i, j) = v;
            k(j, i) = v;
        }
    for (std::size_t i = 0; i < np; ++i) k(i, i) += np;
    for (std::size_t i = np; i < n; ++i) {
        for (std::size_t j = 0; j < np; ++j) {
            const prec_t v = rng.uniform01() - 0.5;
            k(i, j) = v;
            k(j, i) = v;
        }
        k(i, i) = -1.0 - rng.uniform01();
    }
    vec x(n), b(n, 0.0);
    for (auto& v : x) v = rng.uniform01() - 0.5;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b[i] += k(i, j) * x[j];
    std::vector<int> sign(n, 1);
    for (std::size_t i = np; i < n; ++i) sign[i] = -1;
    LdltKkt fac;
    Matrix kc = k;
    fac.factor(std::move(kc), sign, 1e-12);
    fac.solve(b);
    for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-8));
}

TEST_CASE("symmetric eigendecomposition reconstructs the matrix") {
    const std::size_t n = 9;
    CounterRng rng(11, 0);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const prec_t v = 2.0 * rng.uniform01() - 1.0;
            a(i, j) = v;
            a(j, i) = v;
        }
    vec ev;
    Matrix vecs;
    symmetric_eigen(a, ev, vecs);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(ev[i] <= ev[i + 1]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            prec_t recon = 0.0, ortho = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                recon += vecs(i, k) * ev[k] * vecs(j, k);
                ortho += vecs(k, i) * vecs(k, j);
            }
            CHECK(recon == doctest::Approx(a(i, j)).epsilon(1e-9));
            CHECK(ortho == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0).epsilon(1e-9));
        }
}

TEST_CASE("counter rng is stateless and shard independent") {
    CounterRng a(42, 7), b(42, 7);
    for (int i = 0; i < 5; ++i) a.next_u64();
    CHECK(a.at(100) == b.at(100));
    CHECK(CounterRng(42, 7).at(3) != CounterRng(43, 7).at(3));
    CHECK(CounterRng(42, 7).at(3) != CounterRng(42, 8).at(3));
    CounterRng c(1, 1);
    prec_t mean = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const prec_t u = c.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        mean += u;
    }
    CHECK(mean / 10000.0 == doctest::Approx(0.5).epsilon(0.02));
}
