#include "doctest.h"

#include <cmath>

#include "drccmdp/mdp.hpp"
#include "oracle_helpers.hpp"

using namespace drccmdp;

TEST_CASE("single state, single action: unique fixed point rho = 1") {
    MdpModel mdp = oracles::single_state_mdp(1, 0.85);
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    REQUIRE(poly.n_rows() == 1);
    REQUIRE(poly.n_vars() == 1);
    // the single equation reads rho (1 - 0.85) = 0.15
    REQUIRE(poly.eq_rows[0].size() == 1);
    CHECK(poly.eq_rows[0][0].second == doctest::Approx(0.15));
    CHECK(poly.eq_rhs[0] == doctest::Approx(0.15));
    CHECK(poly.residual({1.0}) <= 1e-12);
}

TEST_CASE("any feasible occupation measure sums to one") {
    MdpModel mdp = oracles::random_mdp(3, 2, 0.9, 4);
    StationaryPolicy f;
    f.probs = {{0.3, 0.7}, {1.0, 0.0}, {0.5, 0.5}};
    const vec rho = induced_occupation(mdp, f);
    prec_t total = 0.0;
    for (prec_t v : rho) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("feasibility oracle point satisfies every polytope row") {
    // independent route: induced occupation of a fixed randomized policy,
    // computed by a direct linear solve
    MdpModel mdp = oracles::random_mdp(2, 2, 0.85, 7);
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    StationaryPolicy f;
    f.probs = {{0.4, 0.6}, {0.8, 0.2}};
    const vec rho = induced_occupation(mdp, f);
    CHECK(poly.residual(rho) <= 1e-8);
}

TEST_CASE("invalid transition rows are rejected") {
    std::vector<std::vector<std::string>> labels{{"a"}, {"a"}};
    MdpModel mdp(2, labels, 0.9, {0.5, 0.5});
    mdp.set_transition(0, 0, 1, 0.7);  // row sums to 0.7
    mdp.set_transition(1, 0, 0, 1.0);
    CHECK_THROWS_AS(build_occupation_polytope(mdp), std::invalid_argument);
}

TEST_CASE("extract_policy normalizes and applies the uniform fallback") {
    MdpModel mdp = oracles::random_mdp(2, 2, 0.8, 9);
    SUBCASE("uniform occupation gives the uniform policy") {
        const vec rho(4, 0.25);
        const StationaryPolicy f = extract_policy(mdp, rho);
        for (std::size_t s = 0; s < 2; ++s) {
            CHECK(f.probs[s][0] == doctest::Approx(0.5));
            CHECK(f.probs[s][1] == doctest::Approx(0.5));
        }
    }
    SUBCASE("zero denominator state gets the uniform distribution") {
        const vec rho = {0.0, 0.0, 0.6, 0.4};
        const StationaryPolicy f = extract_policy(mdp, rho);
        CHECK(f.probs[0][0] == doctest::Approx(0.5));
        CHECK(f.probs[0][1] == doctest::Approx(0.5));
        CHECK(f.probs[1][0] == doctest::Approx(0.6));
    }
    SUBCASE("negative mass beyond tolerance throws") {
        CHECK_THROWS_AS(extract_policy(mdp, {-1e-3, 0.5, 0.3, 0.2}), std::invalid_argument);
    }
}

TEST_CASE("nominal lp trivia") {
    SUBCASE("one state, one action, R = 5") {
        MdpModel mdp = oracles::single_state_mdp(1, 0.85);
        const NominalLpResult r = solve_nominal_lp(mdp, {5.0});
        CHECK(r.value == doctest::Approx(5.0).epsilon(1e-7));
        CHECK(r.rho[0] == doctest::Approx(1.0).epsilon(1e-7));
    }
    SUBCASE("one state, two self-loop actions, dominant action wins") {
        MdpModel mdp = oracles::single_state_mdp(2, 0.85);
        const NominalLpResult r = solve_nominal_lp(mdp, {1.0, 2.0});
        CHECK(r.value == doctest::Approx(2.0).epsilon(1e-7));
        CHECK(r.rho[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
        CHECK(r.rho[1] == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("nominal lp matches discounted value iteration on a seeded chain") {
    MdpModel mdp = oracles::random_mdp(5, 2, 0.85, 11);
    vec reward(mdp.n_state_actions());
    CounterRng rng(11, 8);
    for (auto& v : reward) v = 10.0 * rng.uniform01();
    const NominalLpResult lp = solve_nominal_lp(mdp, reward);
    const vec vstar = oracles::value_iteration(mdp, reward);
    prec_t expected = 0.0;
    for (std::size_t s = 0; s < 5; ++s) expected += mdp.initial()[s] * vstar[s];
    CHECK(lp.value == doctest::Approx(expected).epsilon(1e-7));
    // the extracted deterministic policy evaluates to the same value
    const StationaryPolicy f = extract_policy(mdp, sanitize_occupation(lp.rho));
    const vec vf = oracles::policy_value(mdp, f, reward);
    prec_t pol_val = 0.0;
    for (std::size_t s = 0; s < 5; ++s) pol_val += mdp.initial()[s] * vf[s];
    CHECK(pol_val == doctest::Approx(lp.value).epsilon(1e-7));
}

TEST_CASE("feasibility closure and policy round trip") {
    MdpModel mdp = oracles::random_mdp(4, 3, 0.85, 21);
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    CounterRng rng(21, 4);
    for (int trial = 0; trial < 10; ++trial) {
        StationaryPolicy f;
        f.probs.resize(4);
        for (std::size_t s = 0; s < 4; ++s) {
            f.probs[s].resize(3);
            prec_t tot = 0.0;
            for (auto& v : f.probs[s]) {
                v = 0.05 + rng.uniform01();
                tot += v;
            }
            for (auto& v : f.probs[s]) v /= tot;
        }
        const vec rho = induced_occupation(mdp, f);
        CHECK(poly.residual(rho) <= 1e-8);
        // every state has positive visitation mass here, so the round trip
        // recovers the policy
        const StationaryPolicy g = extract_policy(mdp, rho);
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t a = 0; a < 3; ++a)
                CHECK(g.probs[s][a] == doctest::Approx(f.probs[s][a]).epsilon(1e-8));
    }
}

TEST_CASE("nominal lp value lies between reward extremes") {
    MdpModel mdp = oracles::random_mdp(3, 2, 0.7, 33);
    vec reward = {4.0, -1.0, 2.5, 7.0, 0.0, 3.0};
    const NominalLpResult r = solve_nominal_lp(mdp, reward);
    CHECK(r.value >= -1.0 - 1e-9);
    CHECK(r.value <= 7.0 + 1e-9);
}
