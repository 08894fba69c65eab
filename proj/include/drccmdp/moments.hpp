#pragma once

#include <optional>

#include "drccmdp/conic.hpp"
#include "drccmdp/mdp.hpp"
#include "drccmdp/phidiv.hpp"
#include "drccmdp/solution.hpp"

namespace drccmdp {

enum class MomentKind { d1, d2, d3 };
enum class SupportKind { full, nonnegative };

std::string to_string(MomentKind k);

/// Moments-based ambiguity set: known mean/covariance (d1), known mean with
/// covariance bounded by delta0 Sigma (d2), or mean in a delta1-ellipsoid
/// with covariance bounded by delta2 Sigma (d3).
struct MomentAmbiguity {
    MomentKind kind = MomentKind::d1;
    vec mu;
    Matrix sigma;  // positive definite
    prec_t delta0 = 1.0;
    prec_t delta1 = 0.0;
    prec_t delta2 = 1.0;
    SupportKind support = SupportKind::full;
    prec_t epsilon = 0.1;

    void validate() const;
};

/// Safety factor of the full-support second-order cone reformulation:
/// d1 -> sqrt((1-eps)/eps), d2 -> sqrt((1-eps) delta0 / eps),
/// d3 -> sqrt((1-eps) delta2 / eps) + sqrt(delta1).
prec_t kappa_for(const MomentAmbiguity& a);

/// max y s.t. mu' rho - kappa ||Sigma^{1/2} rho|| >= y, rho in the polytope.
/// Sigma^{1/2} is the lower Cholesky factor; the optimum only depends on the
/// norm, so any square root gives the same value.
ConeProgram build_full_support_socp(const OccupationPolytope& poly, const MomentAmbiguity& a);

/// Affine expression over program variables, used to pose matrix-valued
/// constraints entry by entry.
struct AffineExpr {
    std::vector<std::pair<std::size_t, prec_t>> terms;
    prec_t constant = 0.0;
};

/// Conservative inner approximation of a copositivity constraint M in
/// COP^side: splits M = P + N with P psd and N entrywise nonnegative. The
/// entries of M are given as plain (unscaled) affine expressions over the
/// existing variables, ordered like the svec lower triangle. Appends the P
/// variables and both cone blocks to the program; any feasible point of the
/// approximation is feasible for true copositivity, so optima stay valid
/// lower bounds.
void approximate_cop_constraint(ConeProgram& p, std::size_t side,
                                const std::vector<AffineExpr>& entries);

/// Variable layout of the copositive program builder.
struct CopositiveLayout {
    std::size_t n_k = 0;
    std::size_t rho0 = 0, y = 0;
    std::size_t q_mat0 = 0;   // lower triangle of Q, column major
    std::size_t q_vec0 = 0;   // q
    std::size_t t = 0;
    std::size_t r = 0;  // d3 only
};

/// Fixed-multiplier copositive program for the nonnegative-support moments
/// sets, with copositivity replaced by the psd + nonnegative split. The
/// bilinear products lambda*rho and lambda*y are resolved by taking lambda
/// as a parameter, which makes the remaining program conic.
ConeProgram build_copositive_program(const OccupationPolytope& poly, const MomentAmbiguity& a,
                                     prec_t lambda, CopositiveLayout* layout = nullptr);

/// Full-support solve: SOCP with kappa from kappa_for.
DrccmdpSolution solve_full_support_moments(const MdpModel& mdp, const MomentAmbiguity& a);

/// Gaussian chance-constrained baseline (no ambiguity): the same SOCP with
/// the standard normal quantile at 1 - epsilon.
DrccmdpSolution solve_gaussian_ccmdp(const MdpModel& mdp, const vec& mu, const Matrix& sigma,
                                     prec_t epsilon);

/// Nonnegative-support solve: maximizes the fixed-lambda conic value over
/// lambda >= 0 with a coarse log grid ({0} plus 24 points in [1e-3, 1e3])
/// followed by golden-section refinement around the best bracket. The
/// bracket is expanded once, with a warning, when the grid maximum sits at
/// the upper boundary.
DrccmdpSolution solve_moments_nonnegative(const MdpModel& mdp, const MomentAmbiguity& a);

}  // namespace drccmdp
