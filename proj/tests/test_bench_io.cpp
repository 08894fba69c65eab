#include "doctest.h"

#include <cmath>
#include <sstream>
#include <cstdio>

#include "drccmdp/bench.hpp"
#include "drccmdp/io.hpp"
#include "drccmdp/rng.hpp"

using namespace drccmdp;

TEST_CASE("instance tables follow the benchmark patterns at ten states") {
    const MachineReplacementInstance inst = generate_instance(10, 23);
    // revenue 30 for repair, declining for do-not-repair
    CHECK(inst.revenue(0, 0) == doctest::Approx(30.0));
    CHECK(inst.revenue(9, 1) == doctest::Approx(29.1));
    // repair cost mean rises by 0.1 per age; last state costs 5 unrepaired
    CHECK(inst.mean_cost(0, 0) == doctest::Approx(10.0));
    CHECK(inst.mean_cost(9, 0) == doctest::Approx(10.9));
    CHECK(inst.mean_cost(8, 1) == doctest::Approx(0.0));
    CHECK(inst.mean_cost(9, 1) == doctest::Approx(5.0));
    // derived profit means
    CHECK(inst.mu[1] == doctest::Approx(20.0));       // state 1, do not repair
    CHECK(inst.mu[18] == doctest::Approx(9.1));       // state 10, repair
    CHECK(inst.mu[19] == doctest::Approx(14.1));      // state 10, do not repair
    // inflated variance on the risky state's two actions
    CHECK(inst.sigma(18, 18) >= 4.0);
    CHECK(inst.sigma(19, 19) >= 9.0);
    CHECK(inst.sigma(0, 0) >= 1.0);
    CHECK(inst.sigma(0, 0) <= 2.0);
}

TEST_CASE("sigma is positive definite across seeds") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const MachineReplacementInstance inst = generate_instance(10, seed);
        Matrix chol = inst.sigma;
        CHECK_NOTHROW(cholesky_inplace(chol));
    }
}

TEST_CASE("general n extends the affine patterns") {
    const MachineReplacementInstance inst = generate_instance(25, 4);
    CHECK(inst.mu.size() == 50);
    CHECK(inst.revenue(24, 1) == doctest::Approx(30.0 - 0.1 * 24));
    CHECK(inst.mean_cost(24, 1) == doctest::Approx(5.0));
    CHECK(inst.sigma(48, 48) >= 4.0);
    CHECK(inst.sigma(49, 49) >= 9.0);
    Matrix chol = inst.sigma;
    CHECK_NOTHROW(cholesky_inplace(chol));
}

TEST_CASE("scenario generation is reproducible and statistically sound") {
    const MachineReplacementInstance inst = generate_instance(10, 23);
    SUBCASE("bit-identical across runs") {
        const ScenarioSet a = generate_scenarios(inst, 50, 9);
        const ScenarioSet b = generate_scenarios(inst, 50, 9);
        for (std::size_t i = 0; i < 50; ++i)
            for (std::size_t k = 0; k < 20; ++k) CHECK(a.data(i, k) == b.data(i, k));
        std::vector<std::string> labels;
        for (std::size_t s = 0; s < 10; ++s)
            for (std::size_t a2 = 0; a2 < 2; ++a2)
                labels.push_back("s" + std::to_string(s) + "_a" + std::to_string(a2));
        CHECK(scenarios_to_csv(a, labels) == scenarios_to_csv(b, labels));
    }
    SUBCASE("sample mean approaches mu") {
        const std::size_t h = 20000;
        const ScenarioSet s = generate_scenarios(inst, h, 3);
        for (std::size_t k = 0; k < 20; ++k) {
            prec_t mean = 0.0;
            for (std::size_t i = 0; i < h; ++i) mean += s.data(i, k);
            mean /= h;
            const prec_t sd = std::sqrt(inst.sigma(k, k));
            CHECK(std::abs(mean - inst.mu[k]) <= 4.0 * sd / std::sqrt(static_cast<prec_t>(h)));
        }
    }
    SUBCASE("sample covariance approaches sigma in frobenius norm") {
        prec_t prev = 1e300;
        for (std::size_t h : {100ul, 1000ul, 10000ul}) {
            const ScenarioSet s = generate_scenarios(inst, h, 5);
            vec mean(20, 0.0);
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t k = 0; k < 20; ++k) mean[k] += s.data(i, k) / h;
            prec_t frob = 0.0;
            for (std::size_t r = 0; r < 20; ++r)
                for (std::size_t c = 0; c < 20; ++c) {
                    prec_t cov = 0.0;
                    for (std::size_t i = 0; i < h; ++i)
                        cov += (s.data(i, r) - mean[r]) * (s.data(i, c) - mean[c]);
                    cov /= h;
                    frob += (cov - inst.sigma(r, c)) * (cov - inst.sigma(r, c));
                }
            frob = std::sqrt(frob);
            CHECK(frob < prev);
            prev = frob;
        }
    }
    SUBCASE("clipping reports the clipped count") {
        std::size_t clipped = 12345;
        const ScenarioSet s = generate_scenarios(inst, 200, 7, true, &clipped);
        for (std::size_t i = 0; i < 200; ++i)
            for (std::size_t k = 0; k < 20; ++k) CHECK(s.data(i, k) >= 0.0);
        // with means around 9-20 and unit-ish variances, clipping is rare
        CHECK(clipped <= 10);
    }
}

TEST_CASE("scenario csv round trip") {
    const MachineReplacementInstance inst = generate_instance(4, 2);
    const ScenarioSet s = generate_scenarios(inst, 7, 3);
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < 8; ++k) labels.push_back("k" + std::to_string(k));
    const std::string csv = scenarios_to_csv(s, labels);
    const ScenarioSet back = scenarios_from_csv(csv);
    REQUIRE(back.count() == 7);
    REQUIRE(back.dim() == 8);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t k = 0; k < 8; ++k) CHECK(back.data(i, k) == s.data(i, k));
}

TEST_CASE("mdp json schema round trips and validates") {
    const MachineReplacementInstance inst = generate_instance(5, 11);
    const MdpModel mdp = inst.to_mdp(0.85);
    const std::string text = mdp_to_json(mdp);
    const MdpModel back = mdp_from_json(text);
    CHECK(back.n_states() == mdp.n_states());
    CHECK(back.discount() == mdp.discount());
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t sp = 0; sp < 5; ++sp)
                CHECK(back.transition(s, a, sp) == doctest::Approx(mdp.transition(s, a, sp)));
    // malformed rows are rejected
    CHECK_THROWS(mdp_from_json(R"({"n_states":1,"actions":[["a"]],"alpha":0.9,
        "gamma":[1.0],"transition":[[0,0,0,0.5]]})"));
}

TEST_CASE("ambiguity json parses every kind") {
    const std::string moments = R"({"kind":"D2","mu":[1.0,2.0],"sigma":[[1.0,0.0],[0.0,2.0]],
        "delta0":0.9,"support":"full","epsilon":0.1})";
    const AmbiguitySpec spec = ambiguity_from_json(moments);
    REQUIRE(std::holds_alternative<MomentAmbiguity>(spec));
    CHECK(std::get<MomentAmbiguity>(spec).delta0 == doctest::Approx(0.9));
    const std::string phi = R"({"kind":"phi","divergence":"hellinger","theta":0.01,
        "epsilon":0.1,"mu_nu":[1.0],"sigma_nu":[[1.0]]})";
    CHECK(std::holds_alternative<PhiAmbiguity>(ambiguity_from_json(phi)));
    const std::string gauss = R"({"kind":"gaussian","mu":[1.0],"sigma":[[1.0]],"epsilon":0.2})";
    CHECK(std::holds_alternative<GaussianSpec>(ambiguity_from_json(gauss)));
    const std::string nominal = R"({"kind":"nominal","reward":[1.0,2.0]})";
    CHECK(std::holds_alternative<NominalSpec>(ambiguity_from_json(nominal)));
    CHECK_THROWS_AS(ambiguity_from_json(R"({"kind":"unknown"})"), std::invalid_argument);
}

TEST_CASE("experiment runner isolates failures and emits deterministic csv") {
    ExperimentConfig cfg;
    cfg.n_states = 4;
    cfg.seed = 6;
    cfg.scenario_seed = 2;
    cfg.n_scenarios = 30;
    cfg.models = {"lp", "gauss", "d1", "var", "bogus-model"};
    const ExperimentResults a = run_experiment(cfg);
    REQUIRE(a.runs.size() == 5);
    CHECK(a.runs[4].error.find("unknown model key") != std::string::npos);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.runs[i].error.empty());
    const ExperimentResults b = run_experiment(cfg);
    // wall times differ between runs; everything else must be byte identical
    auto strip_wall = [](std::string csv) {
        std::string out;
        std::size_t col = 0;
        for (char c : csv) {
            if (c == ',') ++col;
            if (c == '\n') col = 0;
            // wall_ms is the second-to-last column; cheap filter: drop digits
            // there by rebuilding below instead
            out += c;
        }
        return out;
    };
    (void)strip_wall;
    const std::string csv_a = results_csv(a);
    const std::string csv_b = results_csv(b);
    // compare line by line ignoring the wall_ms field
    std::istringstream sa(csv_a), sb(csv_b);
    std::string la, lb;
    while (std::getline(sa, la) && std::getline(sb, lb)) {
        const auto cut = [](const std::string& s) {
            const std::size_t last = s.rfind(',');
            const std::size_t prev = s.rfind(',', last - 1);
            return s.substr(0, prev) + s.substr(last);
        };
        CHECK(cut(la) == cut(lb));
    }
}
