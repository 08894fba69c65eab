#pragma once

#include "drccmdp/ambiguity.hpp"
#include "drccmdp/solution.hpp"

namespace drccmdp {

/// Solves the DRCCMDP for any ambiguity description, dispatching to the
/// matching reformulation.
DrccmdpSolution solve_drccmdp(const MdpModel& mdp, const AmbiguitySpec& spec,
                              const SolverOptions& opts = {});

/// The cone program the given spec leads to, for IR dumps. Search-based
/// paths return their representative subproblem: the fixed-multiplier
/// program at lambda = 1 for nonnegative-support moments, and the
/// initializing full-support MISOCP for nonnegative-support Wasserstein.
ConeProgram build_program_for(const MdpModel& mdp, const AmbiguitySpec& spec);

}  // namespace drccmdp
