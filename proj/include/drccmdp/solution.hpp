#pragma once

#include <string>
#include <vector>

#include "drccmdp/conic.hpp"
#include "drccmdp/mdp.hpp"

namespace drccmdp {

/// Result of any DRCCMDP solve path: the certified reward level y, the
/// occupation measure it is attained at, the extracted stationary policy,
/// and solver diagnostics.
struct DrccmdpSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    prec_t y = 0.0;
    vec rho;
    StationaryPolicy policy;

    // diagnostics
    std::size_t iterations = 0;
    std::size_t nodes = 0;
    std::size_t rounds = 0;        // alternating-search rounds, when applicable
    prec_t lambda_opt = 0.0;       // scalar multiplier for the moments nonnegative path
    double wall_seconds = 0.0;
    bool certified = true;
    std::string message;
    std::vector<std::string> warnings;
};

}  // namespace drccmdp
