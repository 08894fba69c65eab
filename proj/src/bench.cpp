#include "drccmdp/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "drccmdp/rng.hpp"
#include "drccmdp/solve.hpp"
#include "json.hpp"

namespace drccmdp {

MdpModel MachineReplacementInstance::to_mdp(prec_t alpha) const {
    std::vector<std::vector<std::string>> labels(n_states, {"repair", "do_not_repair"});
    vec gamma(n_states, 1.0 / static_cast<prec_t>(n_states));
    MdpModel mdp(n_states, std::move(labels), alpha, std::move(gamma));
    const std::size_t last = n_states - 1;
    const prec_t q = repair_success, r = breakdown_prob;
    auto add = [&](std::size_t s, std::size_t a, std::size_t sp, prec_t p) {
        if (p > 0.0) mdp.set_transition(s, a, sp, mdp.transition(s, a, sp) + p);
    };
    for (std::size_t s = 0; s < n_states; ++s) {
        add(s, 0, 0, q);
        add(s, 0, s, 1.0 - q);
        if (s == last) {
            add(s, 1, 0, r);  // breakdown forces a replacement
            add(s, 1, s, 1.0 - r);
        } else {
            add(s, 1, s + 1, 1.0);
        }
    }
    mdp.validate();
    return mdp;
}

MachineReplacementInstance generate_instance(std::size_t n_states, std::uint64_t seed) {
    if (n_states < 2) throw std::invalid_argument("generate_instance: need at least 2 states");
    MachineReplacementInstance inst;
    inst.n_states = n_states;
    inst.seed = seed;
    inst.revenue = Matrix(n_states, 2);
    inst.mean_cost = Matrix(n_states, 2);
    for (std::size_t s = 0; s < n_states; ++s) {
        inst.revenue(s, 0) = 30.0;
        inst.revenue(s, 1) = 30.0 - 0.1 * static_cast<prec_t>(s);
        inst.mean_cost(s, 0) = 10.0 + 0.1 * static_cast<prec_t>(s);
        inst.mean_cost(s, 1) = (s + 1 == n_states) ? 5.0 : 0.0;
    }
    const std::size_t nk = 2 * n_states;
    inst.mu.assign(nk, 0.0);
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < 2; ++a)
            inst.mu[2 * s + a] = inst.revenue(s, a) - inst.fixed_cost - inst.mean_cost(s, a);

    CounterRng rng(seed, 1);
    for (;;) {
        Matrix amat(nk, nk);
        for (std::size_t i = 0; i < nk; ++i)
            for (std::size_t j = 0; j < nk; ++j) amat(i, j) = rng.uniform01();
        inst.sigma = Matrix(nk, nk);
        for (std::size_t i = 0; i < nk; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                prec_t acc = 0.0;
                for (std::size_t k = 0; k < nk; ++k) acc += amat(i, k) * amat(j, k);
                acc /= static_cast<prec_t>(nk);
                inst.sigma(i, j) = acc;
                inst.sigma(j, i) = acc;
            }
        for (std::size_t i = 0; i < nk; ++i) inst.sigma(i, i) += 1.0;
        inst.sigma(nk - 2, nk - 2) += 3.0;  // repair at the risky last state: 4 total
        inst.sigma(nk - 1, nk - 1) += 8.0;  // do-not-repair there: 9 total
        Matrix chol = inst.sigma;
        try {
            cholesky_inplace(chol);
            break;
        } catch (const std::runtime_error&) {
            ++inst.jitter_rounds;
            for (std::size_t i = 0; i < nk; ++i) inst.sigma(i, i) += 1e-3;
            Matrix retry = inst.sigma;
            try {
                cholesky_inplace(retry);
                break;
            } catch (const std::runtime_error&) {
                continue;  // regenerate A entirely
            }
        }
    }
    return inst;
}

ScenarioSet generate_scenarios(const MachineReplacementInstance& inst, std::size_t n_scenarios,
                               std::uint64_t seed, bool clip_nonnegative, std::size_t* clipped) {
    if (n_scenarios == 0) throw std::invalid_argument("generate_scenarios: need at least one");
    const std::size_t nk = inst.mu.size();
    Matrix chol = inst.sigma;
    cholesky_inplace(chol);
    ScenarioSet set;
    set.seed = seed;
    set.generator = clip_nonnegative ? "gaussian-cholesky-clipped" : "gaussian-cholesky";
    set.data = Matrix(n_scenarios, nk);
    std::size_t nclipped = 0;
    for (std::size_t i = 0; i < n_scenarios; ++i) {
        CounterRng stream = CounterRng(seed, 0).substream(i);
        vec x(nk);
        for (std::size_t k = 0; k < nk; ++k) x[k] = stream.normal();
        for (std::size_t r = 0; r < nk; ++r) {
            prec_t acc = inst.mu[r];
            for (std::size_t k = 0; k <= r; ++k) acc += chol(r, k) * x[k];
            if (clip_nonnegative && acc < 0.0) {
                acc = 0.0;
                ++nclipped;
            }
            set.data(i, r) = acc;
        }
    }
    if (clipped) *clipped = nclipped;
    return set;
}

AmbiguitySpec model_spec(const std::string& key, const ExperimentConfig& cfg,
                         const MachineReplacementInstance& inst) {
    auto moments = [&](MomentKind kind, SupportKind support) {
        MomentAmbiguity a;
        a.kind = kind;
        a.mu = inst.mu;
        a.sigma = inst.sigma;
        a.delta0 = cfg.delta0;
        a.delta1 = cfg.delta1;
        a.delta2 = cfg.delta2;
        a.support = support;
        a.epsilon = cfg.epsilon;
        return a;
    };
    auto phi = [&](PhiDivergence d) {
        PhiAmbiguity a;
        a.divergence = d;
        a.theta = cfg.theta_phi;
        a.epsilon = cfg.epsilon;
        a.mu_nu = inst.mu;
        a.sigma_nu = inst.sigma;
        return a;
    };
    auto wasserstein = [&](SupportKind support) {
        WassersteinAmbiguity a;
        a.theta = cfg.theta_w;
        a.epsilon = cfg.epsilon;
        a.support = support;
        std::size_t clipped = 0;
        a.scenarios = generate_scenarios(inst, cfg.n_scenarios, cfg.scenario_seed,
                                         support == SupportKind::nonnegative, &clipped);
        return a;
    };
    if (key == "lp") return NominalSpec{inst.mu};
    if (key == "gauss") return GaussianSpec{inst.mu, inst.sigma, cfg.epsilon};
    if (key == "d1") return moments(MomentKind::d1, SupportKind::full);
    if (key == "d2") return moments(MomentKind::d2, SupportKind::full);
    if (key == "d3") return moments(MomentKind::d3, SupportKind::full);
    if (key == "d1n") return moments(MomentKind::d1, SupportKind::nonnegative);
    if (key == "d2n") return moments(MomentKind::d2, SupportKind::nonnegative);
    if (key == "d3n") return moments(MomentKind::d3, SupportKind::nonnegative);
    if (key == "kl") return phi(PhiDivergence::kullback_leibler);
    if (key == "var") return phi(PhiDivergence::variation);
    if (key == "mchi2") return phi(PhiDivergence::modified_chi2);
    if (key == "hellinger") return phi(PhiDivergence::hellinger);
    if (key == "w-full") return wasserstein(SupportKind::full);
    if (key == "w-nonneg") return wasserstein(SupportKind::nonnegative);
    throw std::invalid_argument("unknown model key: " + key);
}

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
    ExperimentResults results;
    results.config = cfg;
    results.instance = generate_instance(cfg.n_states, cfg.seed);
    const MdpModel mdp = results.instance.to_mdp(cfg.alpha);
    for (const std::string& key : cfg.models) {
        ModelRun run;
        run.model = key;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const AmbiguitySpec spec = model_spec(key, cfg, results.instance);
            SolverOptions opts;
            if (key.rfind("w-", 0) == 0) opts.time_limit_seconds = cfg.wasserstein_time_budget;
            run.solution = solve_drccmdp(mdp, spec, opts);
        } catch (const std::exception& e) {
            run.error = e.what();
            run.solution.status = SolveStatus::numerical_failure;
            run.solution.message = e.what();
        }
        run.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        results.runs.push_back(std::move(run));
    }
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream csv(cfg.out_dir + "/results.csv");
        csv << results_csv(results);
        std::ofstream js(cfg.out_dir + "/results.json");
        js << results_json(results);
    }
    return results;
}

std::string results_csv(const ExperimentResults& results) {
    std::string out = "model,y,";
    const std::size_t n = results.instance.n_states;
    char buf[64];
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < 2; ++a) {
            std::snprintf(buf, sizeof buf, "p_s%zu_a%zu,", s, a);
            out += buf;
        }
    out += "wall_ms,status\n";
    for (const ModelRun& run : results.runs) {
        out += run.model + ",";
        std::snprintf(buf, sizeof buf, "%.10g,", run.solution.y);
        out += buf;
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t a = 0; a < 2; ++a) {
                const prec_t p = run.solution.policy.probs.empty()
                                     ? std::nan("")
                                     : run.solution.policy.probs[s][a];
                std::snprintf(buf, sizeof buf, "%.10g,", p);
                out += buf;
            }
        std::snprintf(buf, sizeof buf, "%.3f,", run.wall_ms);
        out += buf;
        out += to_string(run.solution.status) + "\n";
    }
    return out;
}

std::string results_json(const ExperimentResults& results) {
    nlohmann::json j;
    j["n_states"] = results.config.n_states;
    j["seed"] = results.config.seed;
    j["scenario_seed"] = results.config.scenario_seed;
    j["alpha"] = results.config.alpha;
    j["epsilon"] = results.config.epsilon;
    nlohmann::json runs = nlohmann::json::array();
    for (const ModelRun& run : results.runs) {
        nlohmann::json r;
        r["model"] = run.model;
        r["status"] = to_string(run.solution.status);
        r["y"] = run.solution.y;
        r["wall_ms"] = run.wall_ms;
        r["certified"] = run.solution.certified;
        if (!run.error.empty()) r["error"] = run.error;
        if (!run.solution.policy.probs.empty()) {
            nlohmann::json pol = nlohmann::json::array();
            for (const auto& row : run.solution.policy.probs) pol.push_back(row);
            r["policy"] = pol;
        }
        if (!run.solution.rho.empty()) r["rho"] = run.solution.rho;
        if (!run.solution.warnings.empty()) r["warnings"] = run.solution.warnings;
        runs.push_back(r);
    }
    j["runs"] = runs;
    return j.dump(2);
}

}  // namespace drccmdp
