#include "doctest.h"

#include <cmath>

#include "drccmdp/validation.hpp"
#include "oracle_helpers.hpp"

using namespace drccmdp;

TEST_CASE("monte carlo chance trivia") {
    const vec rho = {1.0};
    const vec mu = {0.0};
    Matrix sigma(1, 1);
    sigma(0, 0) = 1.0;
    SUBCASE("impossible thresholds") {
        CHECK(monte_carlo_chance(rho, -1e9, mu, sigma, 1000, 1) == doctest::Approx(1.0));
    }
    SUBCASE("median at one half within the binomial band") {
        const prec_t p = monte_carlo_chance(rho, 0.0, mu, sigma, 100000, 7);
        CHECK(std::abs(p - 0.5) <= 3.0 * std::sqrt(0.25 / 100000.0));
    }
    SUBCASE("deterministic given the seed, shard independent") {
        const prec_t a = monte_carlo_chance(rho, 0.3, mu, sigma, 50000, 42);
        const prec_t b = monte_carlo_chance(rho, 0.3, mu, sigma, 50000, 42);
        CHECK(a == b);
    }
    SUBCASE("doubling the sample count tightens the estimate") {
        // statistical check across seeds: average absolute error halves-ish
        prec_t err_small = 0.0, err_big = 0.0;
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            err_small += std::abs(monte_carlo_chance(rho, 0.0, mu, sigma, 10000, seed) - 0.5);
            err_big += std::abs(monte_carlo_chance(rho, 0.0, mu, sigma, 160000, seed) - 0.5);
        }
        CHECK(err_big < err_small);
    }
}

TEST_CASE("cantelli worst case") {
    const vec mu = {10.0};
    Matrix sigma(1, 1);
    sigma(0, 0) = 4.0;
    const vec rho = {1.0};
    SUBCASE("three sigma gap inverts to one tenth") {
        // m - y = 3 sqrt(v) => probability 1/10
        const prec_t y = 10.0 - 3.0 * 2.0;
        CHECK(cantelli_worst_case(rho, y, mu, sigma) == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("far thresholds vanish") {
        CHECK(cantelli_worst_case(rho, -1e9, mu, sigma) <= 1e-15);
    }
    SUBCASE("mean at or below y reports one with a flag") {
        bool flagged = false;
        CHECK(cantelli_worst_case(rho, 11.0, mu, sigma, &flagged) == doctest::Approx(1.0));
        CHECK(flagged);
    }
    SUBCASE("matches the two-point extremal family") {
        for (prec_t y : {2.0, 4.0, 6.0, 8.0}) {
            const prec_t exact = cantelli_worst_case(rho, y, mu, sigma);
            const prec_t extremal = oracles::two_point_worst_case(10.0, 4.0, y, 1000);
            CHECK(extremal <= exact + 1e-12);
            CHECK(exact - extremal <= 1e-4);
        }
    }
    SUBCASE("scale invariance") {
        const prec_t base = cantelli_worst_case(rho, 4.0, mu, sigma);
        for (prec_t c : {2.0, 10.0, 0.5}) {
            const vec rho_c = {c};
            const prec_t scaled = cantelli_worst_case(rho_c, c * 4.0, mu, sigma);
            CHECK(scaled == doctest::Approx(base).epsilon(1e-10));
        }
    }
}

TEST_CASE("certify dispatches to the matching oracle") {
    MdpModel mdp = oracles::random_mdp(3, 2, 0.85, 55);
    const std::size_t nk = mdp.n_state_actions();
    CounterRng rng(55, 2);
    vec mu(nk);
    for (auto& v : mu) v = 8.0 + 6.0 * rng.uniform01();
    Matrix sigma(nk, nk);
    for (std::size_t i = 0; i < nk; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const prec_t v = 0.1 * (rng.uniform01() - 0.5);
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    for (std::size_t i = 0; i < nk; ++i) sigma(i, i) += 1.5;

    SUBCASE("d1 full-support optimum certifies at epsilon") {
        MomentAmbiguity a;
        a.kind = MomentKind::d1;
        a.mu = mu;
        a.sigma = sigma;
        a.epsilon = 0.1;
        const DrccmdpSolution sol = solve_full_support_moments(mdp, a);
        REQUIRE(sol.status == SolveStatus::optimal);
        const ValidationReport rep = certify(sol, AmbiguitySpec{a});
        CHECK(rep.supported);
        CHECK(rep.oracle == "cantelli");
        REQUIRE(rep.worst_case.has_value());
        CHECK(*rep.worst_case == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(rep.pass);
    }
    SUBCASE("corrupting y fails with positive slack reported") {
        MomentAmbiguity a;
        a.kind = MomentKind::d1;
        a.mu = mu;
        a.sigma = sigma;
        a.epsilon = 0.1;
        DrccmdpSolution sol = solve_full_support_moments(mdp, a);
        REQUIRE(sol.status == SolveStatus::optimal);
        sol.y += 1.0;
        const ValidationReport rep = certify(sol, AmbiguitySpec{a});
        CHECK(!rep.pass);
        CHECK(rep.slack < 0.0);
    }
    SUBCASE("wasserstein optimum certifies through the transport oracle") {
        Matrix sc(60, nk);
        for (std::size_t i = 0; i < 60; ++i)
            for (std::size_t k = 0; k < nk; ++k) sc(i, k) = 8.0 + 4.0 * rng.uniform01();
        WassersteinAmbiguity w;
        w.theta = 0.02;
        w.epsilon = 0.1;
        w.support = SupportKind::full;
        w.scenarios.data = std::move(sc);
        const DrccmdpSolution sol = solve_wasserstein_full(mdp, w);
        REQUIRE((sol.status == SolveStatus::optimal || sol.status == SolveStatus::node_limit));
        const ValidationReport rep = certify(sol, AmbiguitySpec{w});
        CHECK(rep.supported);
        CHECK(rep.oracle == "transport-breakpoints");
        CHECK(rep.pass);
    }
    SUBCASE("gaussian baseline certifies through the exact normal tail") {
        const DrccmdpSolution sol = solve_gaussian_ccmdp(mdp, mu, sigma, 0.1);
        REQUIRE(sol.status == SolveStatus::optimal);
        const ValidationReport rep = certify(sol, AmbiguitySpec{GaussianSpec{mu, sigma, 0.1}});
        CHECK(rep.pass);
        REQUIRE(rep.worst_case.has_value());
        CHECK(*rep.worst_case == doctest::Approx(0.1).epsilon(1e-5));
        REQUIRE(rep.empirical_violation.has_value());
        CHECK(std::abs(*rep.empirical_violation - 0.1) <= 3.0 * std::sqrt(0.1 * 0.9 / 100000.0));
    }
    SUBCASE("unsupported combinations are flagged, never passed") {
        MomentAmbiguity a;
        a.kind = MomentKind::d2;
        a.delta0 = 0.9;
        a.mu = mu;
        a.sigma = sigma;
        a.epsilon = 0.1;
        DrccmdpSolution sol;
        sol.status = SolveStatus::optimal;
        sol.rho.assign(nk, 1.0 / nk);
        sol.y = 0.0;
        const ValidationReport rep = certify(sol, AmbiguitySpec{a});
        CHECK(!rep.supported);
        CHECK(!rep.pass);
    }
}
