#include "doctest.h"

#include <cmath>

#include "drccmdp/conic.hpp"
#include "drccmdp/rng.hpp"

using namespace drccmdp;

namespace {

ConeProgram toy_lp() {
    ConeProgram p;
    p.n_vars = 1;
    p.objective = {1.0};
    p.add_ge_row({{0, 1.0}}, 3.0);
    return p;
}

}  // namespace

TEST_CASE("min x subject to x >= 3") {
    const SolveResult r = solve_continuous(toy_lp());
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("max y with a fixed-norm second-order block") {
    // y <= 5 - 2 ||(1)||: slack (5 - y, 2) lies in the cone, optimum 3
    ConeProgram p;
    p.n_vars = 1;
    p.objective = {1.0};
    p.maximize = true;
    p.add_block(ConeKind::second_order, 2, {{0, 0, 1.0}}, {5.0, 2.0});
    const SolveResult r = solve_continuous(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("2x2 sdp with pinned corner matches the analytic eigen solution") {
    // variables are svec(X); minimize X22 + 2 b X12 with X11 = 1:
    // X22 >= X12^2, so the optimum is -b^2 at X12 = -b
    const prec_t b = 0.7;
    ConeProgram p;
    p.n_vars = 3;
    p.objective = {0.0, std::sqrt(2.0) * b, 1.0};
    p.add_block(ConeKind::psd, 3, {{0, 0, -1.0}, {1, 1, -1.0}, {2, 2, -1.0}}, {0, 0, 0}, 2);
    p.add_eq_row({{0, 1.0}}, 1.0);
    const SolveResult r = solve_continuous(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(-b * b).epsilon(1e-6));
    CHECK(r.primal[1] == doctest::Approx(-std::sqrt(2.0) * b).epsilon(1e-5));
}

TEST_CASE("infeasible and unbounded programs are certified") {
    ConeProgram p = toy_lp();
    p.add_le_row({{0, 1.0}}, 2.0);
    CHECK(solve_continuous(p).status == SolveStatus::infeasible);

    ConeProgram q;
    q.n_vars = 1;
    q.objective = {1.0};
    q.maximize = true;
    q.add_ge_row({{0, 1.0}}, 0.0);
    CHECK(solve_continuous(q).status == SolveStatus::unbounded);
}

TEST_CASE("weak duality holds at optimal continuous solves") {
    CounterRng rng(31, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 4;
        ConeProgram p;
        p.n_vars = n;
        p.maximize = true;
        p.objective.assign(n, 0.0);
        for (auto& v : p.objective) v = rng.uniform01();
        std::vector<std::pair<std::size_t, prec_t>> eq;
        for (std::size_t i = 0; i < n; ++i) eq.emplace_back(i, 1.0);
        p.add_eq_row(eq, 1.0);
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
        for (std::size_t i = 0; i < n; ++i) nn.emplace_back(i, i, -1.0);
        p.add_block(ConeKind::nonneg, n, nn, vec(n, 0.0));
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
        for (std::size_t i = 0; i < n; ++i) soc.emplace_back(1 + i, i, -1.0);
        vec rhs(n + 1, 0.0);
        rhs[0] = 0.9;
        p.add_block(ConeKind::second_order, n + 1, soc, rhs);
        const SolveResult r = solve_continuous(p);
        REQUIRE(r.status == SolveStatus::optimal);
        // max sense: the dual value is an upper bound
        CHECK(r.dual_objective >= r.objective - 1e-7);
        CHECK(std::abs(r.dual_objective - r.objective) <= 1e-6 * (1.0 + std::abs(r.objective)));
    }
}

TEST_CASE("misocp returns the relaxation when it is already integral") {
    // optimum of the box relaxation sits at eta = 1 exactly
    ConeProgram p;
    p.n_vars = 2;  // x, eta
    p.objective = {1.0, 0.5};
    p.maximize = true;
    p.add_le_row({{0, 1.0}}, 2.0);
    p.add_le_row({{0, 1.0}, {1, -1.0}}, 1.5);  // x <= 1.5 + eta
    p.add_ge_row({{1, 1.0}}, 0.0);
    p.add_le_row({{1, 1.0}}, 1.0);
    p.binaries = {1};
    const SolveResult r = solve_misocp(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.nodes == 1);
    CHECK(r.objective == doctest::Approx(2.5).epsilon(1e-7));
}

TEST_CASE("two-binary toy misocp equals exhaustive enumeration") {
    // max x + eta1 + 0.3 eta2 s.t. x <= 2 - ||(eta1 - eta2)||, binaries
    ConeProgram p;
    p.n_vars = 3;
    p.objective = {1.0, 1.0, 0.3};
    p.maximize = true;
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
    soc.emplace_back(0, 0, 1.0);
    soc.emplace_back(1, 1, 1.0);
    soc.emplace_back(1, 2, -1.0);
    p.add_block(ConeKind::second_order, 2, soc, {2.0, 0.0});
    for (std::size_t v : {1ul, 2ul}) {
        p.add_ge_row({{v, 1.0}}, 0.0);
        p.add_le_row({{v, 1.0}}, 1.0);
    }
    p.binaries = {1, 2};
    prec_t best = -1e300;
    for (int mask = 0; mask < 4; ++mask) {
        ConeProgram q = p;
        q.pinned.emplace_back(1, static_cast<prec_t>(mask & 1));
        q.pinned.emplace_back(2, static_cast<prec_t>((mask >> 1) & 1));
        const SolveResult r = solve_continuous(q);
        if (r.status == SolveStatus::optimal) best = std::max(best, r.objective);
    }
    const SolveResult r = solve_misocp(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-7));
}

TEST_CASE("branch and bound is deterministic") {
    ConeProgram p;
    p.n_vars = 4;
    p.objective = {3.0, 2.0, 4.0, 1.0};
    p.maximize = true;
    std::vector<std::pair<std::size_t, prec_t>> row;
    for (std::size_t i = 0; i < 4; ++i) row.emplace_back(i, 1.0 + 0.3 * i);
    p.add_le_row(row, 2.7);
    for (std::size_t i = 0; i < 4; ++i) {
        p.add_ge_row({{i, 1.0}}, 0.0);
        p.add_le_row({{i, 1.0}}, 1.0);
    }
    p.binaries = {0, 1, 2, 3};
    const SolveResult a = solve_misocp(p);
    const SolveResult b = solve_misocp(p);
    REQUIRE(a.status == SolveStatus::optimal);
    CHECK(a.objective == b.objective);
    CHECK(a.nodes == b.nodes);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.primal[i] == b.primal[i]);
}

TEST_CASE("ir json dump round-trips exactly") {
    ConeProgram p;
    p.n_vars = 3;
    p.objective = {0.12345678901234567, -2.0, 1e-17};
    p.maximize = true;
    p.add_eq_row({{0, 1.0 / 3.0}, {2, -7.77}}, 0.1);
    p.add_block(ConeKind::second_order, 3, {{0, 0, 1.0}, {1, 1, -0.333}, {2, 2, 5.5}},
                {1.0, 0.0, -2.0});
    p.add_block(ConeKind::psd, 3, {{0, 0, -1.0}, {1, 1, -1.0}, {2, 2, -1.0}}, {0, 0, 0}, 2);
    p.binaries = {1};
    p.pinned.emplace_back(2, 0.25);
    const std::string dumped = p.to_json();
    const ConeProgram q = ConeProgram::from_json(dumped);
    CHECK(q.to_json() == dumped);
    CHECK(q.n_vars == p.n_vars);
    CHECK(q.objective == p.objective);
    CHECK(q.rhs() == p.rhs());
    CHECK(q.triplets() == p.triplets());
    CHECK(q.binaries == p.binaries);
    REQUIRE(q.blocks().size() == p.blocks().size());
    for (std::size_t i = 0; i < q.blocks().size(); ++i) {
        CHECK(q.blocks()[i].kind == p.blocks()[i].kind);
        CHECK(q.blocks()[i].dim == p.blocks()[i].dim);
        CHECK(q.blocks()[i].psd_side == p.blocks()[i].psd_side);
    }
}

TEST_CASE("svec layout is the scaled lower triangle, column major") {
    CHECK(svec_dim(3) == 6);
    CHECK(svec_index(3, 0, 0) == 0);
    CHECK(svec_index(3, 1, 0) == 1);
    CHECK(svec_index(3, 2, 0) == 2);
    CHECK(svec_index(3, 1, 1) == 3);
    CHECK(svec_index(3, 2, 1) == 4);
    CHECK(svec_index(3, 2, 2) == 5);
    CHECK(svec_index(3, 1, 2) == svec_index(3, 2, 1));
    Matrix m(3, 3);
    std::size_t c = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            m(i, j) = static_cast<prec_t>(++c);
            m(j, i) = m(i, j);
        }
    vec sv(6);
    mat_to_svec(m, sv.data());
    // the svec inner product matches the Frobenius inner product
    prec_t frob = 0.0, dotv = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) frob += m(i, j) * m(i, j);
    for (prec_t v : sv) dotv += v * v;
    CHECK(dotv == doctest::Approx(frob).epsilon(1e-14));
    Matrix back;
    svec_to_mat(sv.data(), back, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(back(i, j) == doctest::Approx(m(i, j)));
}

TEST_CASE("claimed optima satisfy the cones") {
    // a solver must never return an infeasible point labeled optimal
    CounterRng rng(77, 0);
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t n = 6;
        ConeProgram p;
        p.n_vars = n;
        p.maximize = true;
        p.objective.assign(n, 0.0);
        for (auto& v : p.objective) v = rng.uniform01() - 0.3;
        std::vector<std::pair<std::size_t, prec_t>> eq;
        for (std::size_t i = 0; i < n; ++i) eq.emplace_back(i, 1.0);
        p.add_eq_row(eq, 1.0);
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
        for (std::size_t i = 0; i < n; ++i) nn.emplace_back(i, i, -1.0);
        p.add_block(ConeKind::nonneg, n, nn, vec(n, 0.0));
        const SolveResult r = solve_continuous(p);
        REQUIRE(r.status == SolveStatus::optimal);
        CHECK(p.cone_violation(r.primal) <= 1e-7);
    }
}
