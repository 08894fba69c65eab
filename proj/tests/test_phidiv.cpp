#include "doctest.h"

#include <cmath>

#include "drccmdp/phidiv.hpp"
#include "oracle_helpers.hpp"

using namespace drccmdp;

TEST_CASE("normal quantile basics") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    // Phi(1) from the error function
    const prec_t phi1 = 0.5 * std::erfc(-1.0 / std::sqrt(2.0));
    CHECK(normal_quantile(phi1) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(normal_quantile(0.8413447461) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
    // monotone on a grid, and inverse of the normal cdf to 1e-9
    prec_t prev = -1e300;
    for (int k = 1; k < 1000; ++k) {
        const prec_t p = static_cast<prec_t>(k) / 1000.0;
        const prec_t x = normal_quantile(p);
        CHECK(x > prev);
        prev = x;
        const prec_t back = 0.5 * std::erfc(-x / std::sqrt(2.0));
        CHECK(std::abs(back - p) <= 1e-9);
    }
}

TEST_CASE("variation transform") {
    CHECK(f_variation(0.01, 0.1) == doctest::Approx(0.905).epsilon(1e-12));
    CHECK(f_variation(1e-12, 0.3) == doctest::Approx(0.7).epsilon(1e-9));
    prec_t prev = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const prec_t f = f_variation(0.002 * k, 0.1);
        CHECK(f >= prev);
        prev = f;
    }
}

TEST_CASE("modified chi2 transform") {
    CHECK(f_modified_chi2(1e-16, 0.2) == doctest::Approx(0.8).epsilon(1e-8));
    const prec_t f = f_modified_chi2(0.01, 0.1);
    CHECK(f > 0.9);
    CHECK(f < 1.0);
    CHECK_THROWS_AS(f_modified_chi2(0.01, 0.5), std::domain_error);
    prec_t prev = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const prec_t fk = f_modified_chi2(0.002 * k, 0.1);
        CHECK(fk >= prev - 1e-12);
        prev = fk;
    }
}

TEST_CASE("kullback-leibler transform against a dense grid") {
    CHECK(f_kullback_leibler(1e-12, 0.1) == doctest::Approx(0.9).epsilon(1e-6));
    // at theta = 1e-8 the transform tracks the dense grid, not 1 - eps exactly
    CHECK(f_kullback_leibler(1e-8, 0.1) ==
          doctest::Approx(oracles::kl_grid_min(1e-8, 0.1, 400000)).epsilon(1e-6));
    CHECK(f_kullback_leibler(0.01, 0.1) <= 1.0);
    CHECK(f_kullback_leibler(0.01, 0.1) ==
          doctest::Approx(oracles::kl_grid_min(0.01, 0.1, 1000000)).epsilon(1e-6));
    // 20-point lattice against a coarser grid to keep the unit test fast;
    // the acceptance suite runs the 1e6-point version
    for (prec_t theta : {0.005, 0.02, 0.1, 0.5}) {
        for (prec_t eps : {0.05, 0.1, 0.2, 0.35, 0.45}) {
            const prec_t mine = f_kullback_leibler(theta, eps);
            const prec_t grid = oracles::kl_grid_min(theta, eps, 200000);
            CHECK(mine == doctest::Approx(grid).epsilon(5e-6));
        }
    }
}

TEST_CASE("hellinger transform") {
    CHECK(f_hellinger(1e-16, 0.1) == doctest::Approx(0.9).epsilon(1e-8));
    CHECK_THROWS_AS(f_hellinger(2.0 - std::sqrt(2.0), 0.1), std::domain_error);
    // the root is a probability across the admissible domain
    for (int i = 1; i <= 20; ++i)
        for (int j = 1; j <= 20; ++j) {
            const prec_t theta = (2.0 - std::sqrt(2.0)) * i / 21.0;
            const prec_t eps = static_cast<prec_t>(j) / 21.0;
            const prec_t t2 = (2.0 - theta) * (2.0 - theta);
            const prec_t delta = t2 * (4.0 - t2) * eps * (1.0 - eps);
            CHECK(delta >= 0.0);
            const prec_t f = f_hellinger(theta, eps);
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
        }
    prec_t prev = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const prec_t fk = f_hellinger(0.005 * k, 0.1);
        CHECK(fk >= prev - 1e-12);
        prev = fk;
    }
}

TEST_CASE("every transform dominates the nominal confidence level") {
    for (prec_t theta : {0.001, 0.01, 0.1}) {
        for (prec_t eps : {0.05, 0.1, 0.3}) {
            CHECK(f_variation(theta, eps) >= 1.0 - eps);
            CHECK(f_modified_chi2(theta, eps) >= 1.0 - eps - 1e-12);
            CHECK(f_kullback_leibler(theta, eps) >= 1.0 - eps - 1e-9);
            CHECK(f_hellinger(theta, eps) >= 1.0 - eps - 1e-12);
        }
    }
}

TEST_CASE("phi socp on the scalar instance composes transform and quantile") {
    MdpModel mdp = oracles::single_state_mdp(1, 0.85);
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    PhiAmbiguity a;
    a.divergence = PhiDivergence::variation;
    a.theta = 0.01;
    a.epsilon = 0.1;
    a.mu_nu = {10.0};
    a.sigma_nu = Matrix(1, 1);
    a.sigma_nu(0, 0) = 4.0;
    const ConeProgram p = build_phi_socp(poly, a);
    const SolveResult r = solve_continuous(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(10.0 - normal_quantile(0.905) * 2.0).epsilon(1e-7));
}

TEST_CASE("zero radius collapses to the gaussian baseline") {
    MdpModel mdp = oracles::random_mdp(3, 2, 0.85, 17);
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    const std::size_t nk = poly.n_vars();
    CounterRng rng(17, 2);
    vec mu(nk);
    for (auto& v : mu) v = 5.0 + 10.0 * rng.uniform01();
    Matrix sigma(nk, nk);
    for (std::size_t i = 0; i < nk; ++i) sigma(i, i) = 1.0 + rng.uniform01();
    PhiAmbiguity a;
    a.theta = 1e-12;
    a.epsilon = 0.1;
    a.mu_nu = mu;
    a.sigma_nu = sigma;
    const ConeProgram base = build_mean_risk_socp(poly, mu, sigma, normal_quantile(0.9));
    const SolveResult rb = solve_continuous(base);
    REQUIRE(rb.status == SolveStatus::optimal);
    for (auto d : {PhiDivergence::kullback_leibler, PhiDivergence::variation,
                   PhiDivergence::modified_chi2, PhiDivergence::hellinger}) {
        a.divergence = d;
        const SolveResult r = solve_continuous(build_phi_socp(poly, a));
        REQUIRE(r.status == SolveStatus::optimal);
        CHECK(r.objective == doctest::Approx(rb.objective).epsilon(1e-5));
        // robustness never loosens the nominal confidence
        CHECK(r.objective <= rb.objective + 1e-6);
    }
}

TEST_CASE("transforms at or above one are reported as infeasible, not clamped") {
    MdpModel mdp = oracles::single_state_mdp(1, 0.85);
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    PhiAmbiguity a;
    a.divergence = PhiDivergence::variation;
    a.theta = 0.5;  // f = 1 - 0.1 + 0.25 > 1
    a.epsilon = 0.1;
    a.mu_nu = {10.0};
    a.sigma_nu = Matrix(1, 1);
    a.sigma_nu(0, 0) = 1.0;
    CHECK_THROWS_AS(build_phi_socp(poly, a), std::domain_error);
}
