#pragma once

#include <string>

#include "drccmdp/conic.hpp"
#include "drccmdp/mdp.hpp"

namespace drccmdp {

enum class PhiDivergence { kullback_leibler, variation, modified_chi2, hellinger };

std::string to_string(PhiDivergence d);

/// phi-divergence ball around a Gaussian nominal distribution.
struct PhiAmbiguity {
    PhiDivergence divergence = PhiDivergence::kullback_leibler;
    prec_t theta = 0.0;    // ball radius
    prec_t epsilon = 0.0;  // risk level
    vec mu_nu;             // nominal mean, |K|
    Matrix sigma_nu;       // nominal covariance, |K| x |K|, positive definite

    void validate() const;  // parameter domains, including hellinger theta < 2 - sqrt(2)
};

/// Standard normal quantile, absolute error below 1e-9 (rational
/// approximation polished by one Newton step against erfc).
prec_t normal_quantile(prec_t p);

/// Adjusted risk levels f(theta, epsilon) for each divergence.
prec_t f_variation(prec_t theta, prec_t epsilon);
prec_t f_modified_chi2(prec_t theta, prec_t epsilon);
prec_t f_kullback_leibler(prec_t theta, prec_t epsilon);
prec_t f_hellinger(prec_t theta, prec_t epsilon);

/// Dispatch to the divergence-specific transform.
prec_t phi_risk_transform(PhiDivergence d, prec_t theta, prec_t epsilon);

/// Shared SOCP skeleton over the occupation polytope:
///   max y  s.t.  mu' rho - risk_coef ||L' rho||_2 >= y,  rho in Q_alpha(gamma)
/// with L the lower Cholesky factor of sigma. Variables are laid out as
/// rho = 0..|K|-1, y = |K|. Throws std::runtime_error("cholesky-failure...")
/// when sigma is not positive definite.
ConeProgram build_mean_risk_socp(const OccupationPolytope& poly, const vec& mu,
                                 const Matrix& sigma, prec_t risk_coef);

/// The phi-divergence program: risk_coef = quantile of f(theta, epsilon).
/// Throws std::domain_error("infeasible-transform...") when f >= 1, which is
/// reported rather than clamped.
ConeProgram build_phi_socp(const OccupationPolytope& poly, const PhiAmbiguity& a);

}  // namespace drccmdp
