#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "drccmdp/ambiguity.hpp"
#include "drccmdp/solution.hpp"

namespace drccmdp {

/// Outcome of checking a solution against an independent oracle.
struct ValidationReport {
    std::optional<prec_t> empirical_violation;  // Monte Carlo estimate of P(rho'R <= y)
    std::optional<prec_t> worst_case;           // exact oracle value when one exists
    prec_t slack = 0.0;                         // epsilon - certified probability
    bool pass = false;
    bool supported = true;  // false for combinations without an oracle
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::string oracle;
    std::string note;
};

/// Fraction of N Gaussian draws of R with rho'R >= y. The projection
/// rho'R ~ N(rho'mu, rho'Sigma rho) is sampled directly; draws are shard
/// independent thanks to the counter-based stream.
prec_t monte_carlo_chance(const vec& rho, prec_t y, const vec& mu, const Matrix& sigma,
                          std::size_t n, std::uint64_t seed);

/// Exact worst case of P(rho'R <= y) over all distributions with the given
/// mean and covariance (full support): v / (v + (m-y)^2) with m = mu'rho and
/// v = rho'Sigma rho. When m <= y the bound degenerates; 1 is returned and
/// *mean_below (if given) is set.
prec_t cantelli_worst_case(const vec& rho, prec_t y, const vec& mu, const Matrix& sigma,
                           bool* mean_below = nullptr);

/// Dispatches to the matching oracle: Cantelli for d1/full moments, the
/// transport breakpoint oracle for Wasserstein sets, the exact normal tail
/// for the Gaussian baseline, and nominal-distribution Monte Carlo for
/// phi-divergence sets (no exact oracle implemented there). Unsupported
/// combinations are flagged, never passed.
ValidationReport certify(const DrccmdpSolution& sol, const AmbiguitySpec& spec,
                         std::size_t n_samples = 100000, std::uint64_t seed = 1,
                         prec_t tol = 1e-6);

}  // namespace drccmdp
