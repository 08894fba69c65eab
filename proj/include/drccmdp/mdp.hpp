#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drccmdp/linalg.hpp"

namespace drccmdp {

/// Centralized numerical tolerances.
struct Tolerances {
    prec_t feasibility = 1e-8;
    prec_t normalization = 1e-9;
};

/// Finite discounted MDP with known transition kernel.
///
/// States are 0-based. Actions are indexed per state; the flattened
/// state-action index set K is ordered state-major, action-minor, and every
/// module of this library shares that ordering.
class MdpModel {
public:
    MdpModel(std::size_t n_states, std::vector<std::vector<std::string>> action_labels,
             prec_t discount, vec initial);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions(std::size_t s) const { return actions_[s].size(); }
    const std::vector<std::string>& action_labels(std::size_t s) const { return actions_[s]; }
    prec_t discount() const { return alpha_; }
    const vec& initial() const { return gamma_; }

    void set_transition(std::size_t s, std::size_t a, std::size_t next, prec_t prob);
    prec_t transition(std::size_t s, std::size_t a, std::size_t next) const;
    const std::vector<std::pair<std::size_t, prec_t>>& transitions_from(std::size_t s,
                                                                        std::size_t a) const {
        return kernel_[flat_index(s, a)];
    }

    /// Size of the flattened state-action set K.
    std::size_t n_state_actions() const { return offsets_.back(); }
    std::size_t flat_index(std::size_t s, std::size_t a) const { return offsets_[s] + a; }
    std::pair<std::size_t, std::size_t> unflatten(std::size_t k) const;

    /// Throws std::invalid_argument when transition rows do not normalize,
    /// the initial distribution is off, or a state has no action.
    void validate(const Tolerances& tol = {}) const;

private:
    std::size_t n_states_;
    std::vector<std::vector<std::string>> actions_;
    prec_t alpha_;
    vec gamma_;
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<std::pair<std::size_t, prec_t>>> kernel_;  // per (s,a): (s', p)
};

/// Linear description of the occupation-measure polytope: one equality row
/// per state over the flattened index set, plus rho >= 0.
struct OccupationPolytope {
    std::vector<std::pair<std::size_t, std::size_t>> index;  // flattened (s, a)
    std::vector<std::vector<std::pair<std::size_t, prec_t>>> eq_rows;  // per state: (k, coef)
    vec eq_rhs;

    std::size_t n_vars() const { return index.size(); }
    std::size_t n_rows() const { return eq_rows.size(); }

    /// max residual |A rho - rhs| together with the worst negative entry.
    prec_t residual(const vec& rho) const;
};

/// Randomized stationary policy; probs[s][a] is the probability of action a
/// in state s.
struct StationaryPolicy {
    std::vector<vec> probs;
};

/// Builds the polytope with row s' given by
///   sum_{(s,a)} rho(s,a) (delta(s',s) - alpha p(s,a,s')) = (1-alpha) gamma(s').
OccupationPolytope build_occupation_polytope(const MdpModel& mdp, const Tolerances& tol = {});

/// f(s,a) = rho(s,a) / sum_a' rho(s,a'); states whose denominator falls below
/// 1e-12 get the uniform distribution over their actions.
StationaryPolicy extract_policy(const MdpModel& mdp, const vec& rho);

/// Clips solver round-off: entries in [-1e-5, 0) become 0. Anything more
/// negative is a genuine infeasibility and throws.
vec sanitize_occupation(vec rho);

struct NominalLpResult {
    prec_t value = 0.0;
    vec rho;
};

/// Solves max rho' R over the occupation polytope. Throws std::runtime_error
/// on solver failure.
NominalLpResult solve_nominal_lp(const MdpModel& mdp, const vec& reward);

/// Occupation measure induced by a stationary policy, from the linear system
/// of discounted state visitation frequencies.
vec induced_occupation(const MdpModel& mdp, const StationaryPolicy& policy);

}  // namespace drccmdp
