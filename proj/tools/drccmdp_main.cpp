#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "drccmdp/bench.hpp"
#include "drccmdp/io.hpp"
#include "drccmdp/solve.hpp"
#include "drccmdp/validation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitSolverFailure = 3;
constexpr int kExitBadInput = 4;

int status_exit_code(drccmdp::SolveStatus st) {
    using drccmdp::SolveStatus;
    switch (st) {
    case SolveStatus::optimal: return kExitOk;
    case SolveStatus::node_limit: return kExitOk;  // incumbent returned, flagged uncertified
    case SolveStatus::infeasible:
    case SolveStatus::unbounded: return kExitInfeasible;
    case SolveStatus::numerical_failure: return kExitSolverFailure;
    }
    return kExitSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drccmdp: distributionally robust chance-constrained MDP solver"};
    app.require_subcommand(1);

    // solve
    std::string mdp_path, ambiguity_path, out_path, dump_ir_path;
    CLI::App* solve = app.add_subcommand("solve", "solve one DRCCMDP model");
    solve->add_option("--mdp", mdp_path, "MDP model JSON")->required();
    solve->add_option("--ambiguity", ambiguity_path, "ambiguity spec JSON")->required();
    solve->add_option("--out", out_path, "write the solution JSON here");
    solve->add_option("--dump-ir", dump_ir_path,
                      "dump the cone-program IR as JSON (search paths dump their "
                      "representative subproblem)");

    // validate
    std::string sol_path;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    CLI::App* validate = app.add_subcommand("validate", "certify a solution against the oracles");
    validate->add_option("--solution", sol_path, "solution JSON from solve")->required();
    validate->add_option("--ambiguity", ambiguity_path, "ambiguity spec JSON")->required();
    validate->add_option("--samples", samples, "Monte Carlo sample count");
    validate->add_option("--seed", seed, "Monte Carlo seed");

    // bench machine-replacement
    CLI::App* bench = app.add_subcommand("bench", "benchmark instances");
    CLI::App* machine = bench->add_subcommand("machine-replacement", "machine replacement study");
    drccmdp::ExperimentConfig cfg;
    std::string models_csv = "gauss,d1,d2,d3,kl,var,mchi2,hellinger,w-full,w-nonneg";
    machine->add_option("--states", cfg.n_states, "number of machine ages");
    machine->add_option("--seed", cfg.seed, "instance seed");
    machine->add_option("--scenario-seed", cfg.scenario_seed, "scenario stream seed");
    machine->add_option("--w-budget", cfg.wasserstein_time_budget, "Wasserstein search budget in seconds");
    machine->add_option("--alpha", cfg.alpha, "discount factor");
    machine->add_option("--epsilon", cfg.epsilon, "risk level");
    machine->add_option("--scenarios", cfg.n_scenarios, "Wasserstein scenario count");
    machine->add_option("--theta-phi", cfg.theta_phi, "phi-divergence radius");
    machine->add_option("--theta-w", cfg.theta_w, "Wasserstein radius");
    machine->add_option("--models", models_csv,
                        "comma separated model keys (lp,gauss,d1,d2,d3,d1n,d2n,d3n,kl,var,"
                        "mchi2,hellinger,w-full,w-nonneg)");
    machine->add_option("--out", cfg.out_dir, "output directory for results.csv/.json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) {
            const drccmdp::MdpModel mdp = drccmdp::mdp_from_json(drccmdp::read_file(mdp_path));
            const drccmdp::AmbiguitySpec spec =
                drccmdp::ambiguity_from_json(drccmdp::read_file(ambiguity_path));
            if (!dump_ir_path.empty()) {
                const drccmdp::ConeProgram prog = drccmdp::build_program_for(mdp, spec);
                drccmdp::write_file(dump_ir_path, prog.to_json());
            }
            const drccmdp::DrccmdpSolution sol = drccmdp::solve_drccmdp(mdp, spec);
            const std::string out = drccmdp::solution_to_json(sol);
            if (out_path.empty()) std::puts(out.c_str());
            else drccmdp::write_file(out_path, out);
            std::fprintf(stderr, "status: %s  y = %.10g\n",
                         drccmdp::to_string(sol.status).c_str(), sol.y);
            return status_exit_code(sol.status);
        }
        if (*validate) {
            const drccmdp::DrccmdpSolution sol =
                drccmdp::solution_from_json(drccmdp::read_file(sol_path));
            const drccmdp::AmbiguitySpec spec =
                drccmdp::ambiguity_from_json(drccmdp::read_file(ambiguity_path));
            const drccmdp::ValidationReport rep = drccmdp::certify(sol, spec, samples, seed);
            std::puts(drccmdp::report_to_json(rep).c_str());
            if (!rep.supported) return kExitBadInput;
            return rep.pass ? kExitOk : kExitSolverFailure;
        }
        if (*machine) {
            cfg.models.clear();
            std::string cur;
            for (char c : models_csv + ",") {
                if (c == ',') {
                    if (!cur.empty()) cfg.models.push_back(cur);
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            const drccmdp::ExperimentResults results = drccmdp::run_experiment(cfg);
            std::fputs(drccmdp::results_csv(results).c_str(), stdout);
            for (const auto& run : results.runs)
                if (!run.error.empty())
                    std::fprintf(stderr, "model %s failed: %s\n", run.model.c_str(),
                                 run.error.c_str());
            return kExitOk;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "bad input: %s\n", e.what());
        return kExitBadInput;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "bad input: %s\n", e.what());
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSolverFailure;
    }
    return kExitBadInput;
}
