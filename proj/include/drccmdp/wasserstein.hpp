#pragma once

#include <cstdint>
#include <string>

#include "drccmdp/conic.hpp"
#include "drccmdp/mdp.hpp"
#include "drccmdp/moments.hpp"
#include "drccmdp/solution.hpp"

namespace drccmdp {

/// Empirical scenarios of the reward vector, one row per scenario.
struct ScenarioSet {
    Matrix data;  // H x |K|
    std::uint64_t seed = 0;
    std::string generator;

    std::size_t count() const { return data.rows(); }
    std::size_t dim() const { return data.cols(); }
    vec row_vec(std::size_t i) const {
        return vec(data.row(i), data.row(i) + data.cols());
    }
};

/// Order-1 Wasserstein ball around the empirical distribution of the
/// scenarios. Only order 1 is supported; the reformulations from the
/// transport dual fix p = 1.
struct WassersteinAmbiguity {
    prec_t theta = 0.0;
    prec_t epsilon = 0.0;
    SupportKind support = SupportKind::full;
    int order = 1;
    ScenarioSet scenarios;

    void validate() const;
};

/// Euclidean distance from xi to the halfspace {z : rho' z <= y}:
/// max(0, (rho' xi - y) / ||rho||). Throws on a zero rho.
prec_t projection_distance(const vec& xi, const vec& rho, prec_t y);

/// Euclidean distance from xi to {z >= 0, rho' z <= y}, computed exactly by
/// walking the breakpoints of nu -> rho' max(0, xi - nu rho). Returns
/// +infinity when the set is empty (rho >= 0 with y < 0).
prec_t nonnegative_projection_distance(const vec& xi, const vec& rho, prec_t y);

/// Big-M constant theta/epsilon + 2 max_i ||xi_i||.
prec_t big_m(const WassersteinAmbiguity& a);

/// Variable layout of the full-support MISOCP.
struct MisocpLayout {
    std::size_t n_k = 0, n_scen = 0;
    std::size_t rho0 = 0, y = 0, beta = 0, t = 0, w = 0;
    std::size_t b0 = 0;    // b_i, one per scenario
    std::size_t eta0 = 0;  // binary indicators
};

/// Full-support big-M reformulation. Beyond the indicator constraints it
/// carries the redundant lower-bound row y >= min_i rho'xi_i - theta/eps
/// ||rho|| in a per-scenario big-M relaxed form tied to the auxiliary cone
/// variable w >= (theta/eps)||rho||; the row never cuts an optimum.
ConeProgram build_misocp(const OccupationPolytope& poly, const WassersteinAmbiguity& a,
                         MisocpLayout* layout = nullptr);

/// Scenario-wise dual values of the nonnegative-support transport problem.
struct ScenarioDual {
    prec_t lambda = 0.0;
    vec zeta;
    prec_t value = 0.0;  // lambda (rho'xi - y) - zeta'xi = projection distance
};

/// Biconvex reformulation for nonnegative support. The bilinear blocks
/// lambda_i * rho and lambda_i * y make the joint program nonconvex; the two
/// convex sections below are what the alternating search iterates on.
struct BiconvexProgram {
    OccupationPolytope poly;
    WassersteinAmbiguity ambiguity;
};

BiconvexProgram build_biconvex(const OccupationPolytope& poly, const WassersteinAmbiguity& a);

/// Dual step: for fixed (rho, y), the per-scenario subproblem
///   max lambda (rho'xi - y) - zeta'xi  s.t.  ||zeta - lambda rho|| <= 1
/// solved exactly through its primal projection form (strong duality).
ScenarioDual solve_scenario_dual(const vec& xi, const vec& rho, prec_t y);

/// The same subproblem as an explicit cone program (variables: lambda, then
/// zeta), used to cross-check the closed form.
ConeProgram build_scenario_dual_socp(const vec& xi, const vec& rho, prec_t y);

/// Primal step: for fixed duals, maximize y over (y, rho, l, g).
/// Layout: rho = 0..K-1, y = K, l = K+1, g_i = K+2+i.
ConeProgram build_biconvex_primal_step(const BiconvexProgram& bp,
                                       const std::vector<ScenarioDual>& duals);

/// Exact worst-case probability sup_{F in ball} P_F(rho' R <= y), evaluated
/// at the breakpoints of the piecewise-linear transport dual
///   min_{lam >= 0} lam theta + (1/H) sum_i max(0, 1 - lam d_i).
prec_t wasserstein_worst_case_prob(const vec& rho, prec_t y, const WassersteinAmbiguity& a);

/// Full-support solve: branch and bound on the MISOCP with an incumbent
/// heuristic that bisects y for the relaxation's rho against the exact
/// worst-case oracle and replays the induced indicator pattern.
DrccmdpSolution solve_wasserstein_full(const MdpModel& mdp, const WassersteinAmbiguity& a,
                                       const SolverOptions& opts = {});

/// Nonnegative-support solve: alternating convex search on the biconvex
/// program, initialized from the full-support MISOCP on the same scenarios.
/// Stops when y improves by less than 1e-7 or after max_rounds.
DrccmdpSolution solve_wasserstein_nonnegative(const MdpModel& mdp, const WassersteinAmbiguity& a,
                                              const SolverOptions& opts = {},
                                              std::size_t max_rounds = 200);

}  // namespace drccmdp
