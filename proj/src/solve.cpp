#include "drccmdp/solve.hpp"

namespace drccmdp {

DrccmdpSolution solve_drccmdp(const MdpModel& mdp, const AmbiguitySpec& spec,
                              const SolverOptions& opts) {
    struct Visitor {
        const MdpModel& mdp;
        const SolverOptions& opts;

        DrccmdpSolution operator()(const NominalSpec& s) const {
            const NominalLpResult lp = solve_nominal_lp(mdp, s.reward);
            DrccmdpSolution sol;
            sol.status = SolveStatus::optimal;
            sol.y = lp.value;
            sol.rho = sanitize_occupation(lp.rho);
            sol.policy = extract_policy(mdp, sol.rho);
            return sol;
        }
        DrccmdpSolution operator()(const GaussianSpec& s) const {
            return solve_gaussian_ccmdp(mdp, s.mu, s.sigma, s.epsilon);
        }
        DrccmdpSolution operator()(const MomentAmbiguity& a) const {
            return a.support == SupportKind::full ? solve_full_support_moments(mdp, a)
                                                  : solve_moments_nonnegative(mdp, a);
        }
        DrccmdpSolution operator()(const PhiAmbiguity& a) const {
            const OccupationPolytope poly = build_occupation_polytope(mdp);
            DrccmdpSolution sol;
            ConeProgram p;
            try {
                p = build_phi_socp(poly, a);
            } catch (const std::domain_error& e) {
                sol.status = SolveStatus::infeasible;
                sol.message = e.what();
                return sol;
            }
            const SolveResult r = solve_continuous(p, opts);
            sol.status = r.status;
            sol.iterations = r.iterations;
            sol.wall_seconds = r.wall_seconds;
            sol.message = r.message;
            if (r.status == SolveStatus::optimal) {
                sol.y = r.objective;
                sol.rho = sanitize_occupation(
                    vec(r.primal.begin(), r.primal.begin() + mdp.n_state_actions()));
                sol.policy = extract_policy(mdp, sol.rho);
            }
            return sol;
        }
        DrccmdpSolution operator()(const WassersteinAmbiguity& a) const {
            return a.support == SupportKind::full ? solve_wasserstein_full(mdp, a, opts)
                                                  : solve_wasserstein_nonnegative(mdp, a, opts);
        }
    };
    return std::visit(Visitor{mdp, opts}, spec);
}

ConeProgram build_program_for(const MdpModel& mdp, const AmbiguitySpec& spec) {
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    struct Visitor {
        const MdpModel& mdp;
        const OccupationPolytope& poly;

        ConeProgram operator()(const NominalSpec& s) const {
            ConeProgram p;
            p.n_vars = poly.n_vars();
            p.objective = s.reward;
            p.maximize = true;
            for (std::size_t r = 0; r < poly.n_rows(); ++r)
                p.add_eq_row({poly.eq_rows[r].begin(), poly.eq_rows[r].end()}, poly.eq_rhs[r]);
            std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
            for (std::size_t k = 0; k < p.n_vars; ++k) nn.emplace_back(k, k, -1.0);
            p.add_block(ConeKind::nonneg, p.n_vars, nn, vec(p.n_vars, 0.0));
            return p;
        }
        ConeProgram operator()(const GaussianSpec& s) const {
            return build_mean_risk_socp(poly, s.mu, s.sigma, normal_quantile(1.0 - s.epsilon));
        }
        ConeProgram operator()(const MomentAmbiguity& a) const {
            return a.support == SupportKind::full ? build_full_support_socp(poly, a)
                                                  : build_copositive_program(poly, a, 1.0);
        }
        ConeProgram operator()(const PhiAmbiguity& a) const { return build_phi_socp(poly, a); }
        ConeProgram operator()(const WassersteinAmbiguity& a) const {
            WassersteinAmbiguity full = a;
            full.support = SupportKind::full;
            return build_misocp(poly, full);
        }
    };
    return std::visit(Visitor{mdp, poly}, spec);
}

}  // namespace drccmdp
