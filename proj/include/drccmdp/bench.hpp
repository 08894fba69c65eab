#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drccmdp/ambiguity.hpp"
#include "drccmdp/mdp.hpp"
#include "drccmdp/solution.hpp"

namespace drccmdp {

/// Machine-replacement benchmark instance. States are machine ages, two
/// actions everywhere ("repair", "do not repair"); revenues decay with age
/// and the last state is risky, with inflated cost variance on both of its
/// actions.
struct MachineReplacementInstance {
    std::size_t n_states = 0;
    prec_t fixed_cost = 10.0;      // K
    Matrix revenue;                // L, n x 2
    Matrix mean_cost;              // mu_Z, n x 2
    vec mu;                        // profit means over flattened (s,a)
    Matrix sigma;                  // |K| x |K| covariance
    std::uint64_t seed = 0;
    std::size_t jitter_rounds = 0;  // times 1e-3 I was added to reach PD

    // kernel parameters: a repair restores the machine to new with this
    // probability (otherwise nothing changes), and an unrepaired worn-out
    // machine breaks down and is replaced with probability breakdown_prob
    prec_t repair_success = 0.425;
    prec_t breakdown_prob = 0.10;

    /// Discounted MDP over machine ages: not repairing ages the machine by
    /// one state; the oldest state wears on until it breaks down.
    MdpModel to_mdp(prec_t alpha = 0.85) const;
};

/// Reproduces the benchmark tables at n_states = 10 (revenue 30 falling by
/// 0.1 per age for "do not repair", repair cost mean 10 rising by 0.1, last
/// state cost 5 when unrepaired) and extends the same affine patterns to
/// general n. Sigma = A A^T / |K| + D with A uniform(0,1) seeded and D the
/// identity except entries 4 and 9 on the last state's actions.
MachineReplacementInstance generate_instance(std::size_t n_states, std::uint64_t seed);

/// Gaussian scenarios xi_i = B x_i + mu with B the lower Cholesky factor of
/// Sigma. With clip_nonnegative the entries are clipped at zero and the
/// number of clipped entries is reported.
ScenarioSet generate_scenarios(const MachineReplacementInstance& inst, std::size_t n_scenarios,
                               std::uint64_t seed, bool clip_nonnegative = false,
                               std::size_t* clipped = nullptr);

struct ExperimentConfig {
    std::size_t n_states = 10;
    std::uint64_t seed = 23;
    std::uint64_t scenario_seed = 1;
    prec_t alpha = 0.85;
    prec_t epsilon = 0.1;
    prec_t delta0 = 0.9;
    prec_t delta1 = 1.0;
    prec_t delta2 = 1.0;
    prec_t theta_phi = 0.01;
    prec_t theta_w = 0.01;
    std::size_t n_scenarios = 1000;
    double wasserstein_time_budget = 60.0;  // seconds of search per model
    std::vector<std::string> models = default_models();
    std::string out_dir;  // when nonempty, results.csv / results.json are written

    static std::vector<std::string> default_models() {
        return {"gauss", "d1", "d2", "d3", "kl", "var", "mchi2", "hellinger", "w-full", "w-nonneg"};
    }
};

struct ModelRun {
    std::string model;
    DrccmdpSolution solution;
    double wall_ms = 0.0;
    std::string error;  // nonempty when the model failed outright
};

struct ExperimentResults {
    ExperimentConfig config;
    MachineReplacementInstance instance;
    std::vector<ModelRun> runs;
};

/// Builds the ambiguity description a model key stands for, on this
/// instance's data. Known keys: lp, gauss, d1, d2, d3, d1n, d2n, d3n, kl,
/// var, mchi2, hellinger, w-full, w-nonneg.
AmbiguitySpec model_spec(const std::string& key, const ExperimentConfig& cfg,
                         const MachineReplacementInstance& inst);

/// Runs every requested model; failures are isolated per model and the run
/// continues. Identical config and seed give identical output bytes.
ExperimentResults run_experiment(const ExperimentConfig& cfg);

std::string results_csv(const ExperimentResults& results);
std::string results_json(const ExperimentResults& results);

}  // namespace drccmdp
