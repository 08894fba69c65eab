#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drccmdp/linalg.hpp"

namespace drccmdp {

enum class ConeKind { zero, nonneg, second_order, psd };

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure, node_limit };

std::string to_string(SolveStatus s);

/// One cone block of a conic program. For psd blocks, dim = side*(side+1)/2
/// entries in svec order: lower triangle, column major, off-diagonal entries
/// scaled by sqrt(2) so that the svec inner product equals the matrix
/// Frobenius inner product.
struct ConeBlock {
    ConeKind kind = ConeKind::zero;
    std::size_t dim = 0;
    std::size_t psd_side = 0;  // nonzero only for psd blocks
};

/// Solver-agnostic conic IR.
///
/// The program is
///     min/max  objective' x
///     s.t.     b - A x in K1 x K2 x ... (stacked cone blocks)
/// where zero blocks encode equalities (b - Ax = 0), nonneg blocks encode
/// A x <= b, second-order blocks require the first slack entry to dominate
/// the Euclidean norm of the rest, and psd blocks require mat(svec slack)
/// to be positive semidefinite. Variables listed in `binaries` are
/// restricted to {0,1} by solve_misocp; solve_continuous ignores them.
class ConeProgram {
public:
    std::size_t n_vars = 0;
    vec objective;          // length n_vars
    bool maximize = false;

    /// Appends a cone block with `dim` rows. entries hold (row_in_block,
    /// variable, coefficient) triplets of A; rhs holds the block's b.
    /// Returns the block index.
    std::size_t add_block(ConeKind kind, std::size_t dim,
                          const std::vector<std::tuple<std::size_t, std::size_t, prec_t>>& entries,
                          const vec& rhs, std::size_t psd_side = 0);

    /// Single linear row helpers: lhs' x (cmp) rhs.
    void add_eq_row(const std::vector<std::pair<std::size_t, prec_t>>& lhs, prec_t rhs);
    void add_le_row(const std::vector<std::pair<std::size_t, prec_t>>& lhs, prec_t rhs);
    void add_ge_row(const std::vector<std::pair<std::size_t, prec_t>>& lhs, prec_t rhs);

    const std::vector<ConeBlock>& blocks() const { return blocks_; }
    std::size_t total_rows() const { return total_rows_; }
    const vec& rhs() const { return b_; }
    vec& mutable_rhs() { return b_; }
    const std::vector<std::tuple<std::size_t, std::size_t, prec_t>>& triplets() const {
        return triplets_;  // (absolute row, var, coeff)
    }

    std::vector<std::size_t> binaries;  // variable indices restricted to {0,1}

    /// Variables pinned to fixed values; realized as extra equality rows by
    /// the solver. Used by branch-and-bound nodes.
    std::vector<std::pair<std::size_t, prec_t>> pinned;

    /// Evaluates slack b - A x for a candidate point (stacked by blocks).
    vec slack(const vec& x) const;

    /// Worst cone violation of a candidate point: max over blocks of how far
    /// the slack is from the cone (0 when feasible).
    prec_t cone_violation(const vec& x) const;

    std::string to_json() const;
    static ConeProgram from_json(const std::string& text);

private:
    std::vector<ConeBlock> blocks_;
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> triplets_;
    vec b_;
    std::size_t total_rows_ = 0;
};

struct SolveResult {
    SolveStatus status = SolveStatus::numerical_failure;
    prec_t objective = 0.0;       // in the user's sense
    vec primal;                   // length n_vars
    vec dual;                     // cone duals (stacked rows); certificate ray on infeasible/unbounded
    prec_t dual_objective = 0.0;  // in the user's sense
    std::size_t iterations = 0;
    std::size_t nodes = 0;
    double wall_seconds = 0.0;
    bool certified = true;        // false when a node/iteration limit stopped the search
    std::string message;
};

struct SolverOptions {
    prec_t feas_tol = 1e-8;
    prec_t rel_gap_tol = 1e-8;
    std::size_t max_iterations = 120;
    // branch and bound
    prec_t integrality_tol = 1e-6;
    prec_t mip_rel_gap = 1e-6;
    std::size_t node_limit = 100000;
    double time_limit_seconds = 0.0;  // 0 = none
    bool verbose = false;
};

/// Solves the continuous relaxation (binary markers ignored; explicit box
/// rows, if any, still apply). Statuses are certified by the homogeneous
/// embedding: infeasible/unbounded come with a separating ray in `dual` /
/// `primal`.
SolveResult solve_continuous(const ConeProgram& p, const SolverOptions& opts = {});

/// Candidate integer assignments proposed from a node relaxation; each is
/// tried by pinning and re-solving, and kept when feasible and improving.
using MisocpHeuristic =
    std::function<std::vector<std::vector<prec_t>>(const ConeProgram&, const vec& relax_x)>;

/// Best-first branch and bound over the continuous relaxations. Branches on
/// the most fractional binary (lowest index on ties), explores nodes in
/// best-bound order with FIFO tie-break, and returns the incumbent with
/// relative gap <= opts.mip_rel_gap. Hitting the node limit returns the
/// incumbent flagged certified=false with status node_limit.
SolveResult solve_misocp(const ConeProgram& p, const SolverOptions& opts = {},
                         const MisocpHeuristic& heuristic = nullptr);

/// svec index helpers shared by the psd-block producers (moments module) and
/// the solver: lower triangle, column major, off-diagonals scaled by sqrt(2).
std::size_t svec_dim(std::size_t side);
std::size_t svec_index(std::size_t side, std::size_t row, std::size_t col);
prec_t svec_scale(std::size_t row, std::size_t col);
void svec_to_mat(const prec_t* sv, Matrix& out, std::size_t side);
void mat_to_svec(const Matrix& m, prec_t* sv);

}  // namespace drccmdp
