#include "drccmdp/mdp.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "drccmdp/conic.hpp"

namespace drccmdp {

MdpModel::MdpModel(std::size_t n_states, std::vector<std::vector<std::string>> action_labels,
                   prec_t discount, vec initial)
    : n_states_(n_states), actions_(std::move(action_labels)), alpha_(discount),
      gamma_(std::move(initial)) {
    if (n_states_ == 0) throw std::invalid_argument("MdpModel: need at least one state");
    if (actions_.size() != n_states_)
        throw std::invalid_argument("MdpModel: one action list per state required");
    if (!(alpha_ > 0.0 && alpha_ < 1.0))
        throw std::invalid_argument("MdpModel: discount must lie in (0,1)");
    if (gamma_.size() != n_states_)
        throw std::invalid_argument("MdpModel: initial distribution size mismatch");
    offsets_.resize(n_states_ + 1, 0);
    for (std::size_t s = 0; s < n_states_; ++s) {
        if (actions_[s].empty())
            throw std::invalid_argument("MdpModel: every state needs at least one action");
        offsets_[s + 1] = offsets_[s] + actions_[s].size();
    }
    kernel_.resize(offsets_.back());
}

void MdpModel::set_transition(std::size_t s, std::size_t a, std::size_t next, prec_t prob) {
    if (s >= n_states_ || next >= n_states_ || a >= actions_[s].size())
        throw std::invalid_argument("set_transition: index out of range");
    auto& row = kernel_[flat_index(s, a)];
    for (auto& [sp, p] : row)
        if (sp == next) {
            p = prob;
            return;
        }
    row.emplace_back(next, prob);
}

prec_t MdpModel::transition(std::size_t s, std::size_t a, std::size_t next) const {
    for (const auto& [sp, p] : kernel_[flat_index(s, a)])
        if (sp == next) return p;
    return 0.0;
}

std::pair<std::size_t, std::size_t> MdpModel::unflatten(std::size_t k) const {
    std::size_t s = 0;
    while (offsets_[s + 1] <= k) ++s;
    return {s, k - offsets_[s]};
}

void MdpModel::validate(const Tolerances& tol) const {
    for (std::size_t s = 0; s < n_states_; ++s)
        for (std::size_t a = 0; a < actions_[s].size(); ++a) {
            prec_t sum = 0.0;
            for (const auto& [sp, p] : kernel_[flat_index(s, a)]) {
                if (p < -tol.normalization || p > 1.0 + tol.normalization)
                    throw std::invalid_argument("invalid-model: transition probability outside [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol.normalization)
                throw std::invalid_argument("invalid-model: transition row does not normalize");
        }
    prec_t gsum = 0.0;
    for (prec_t g : gamma_) {
        if (g < -tol.normalization)
            throw std::invalid_argument("invalid-model: negative initial probability");
        gsum += g;
    }
    if (std::abs(gsum - 1.0) > tol.normalization)
        throw std::invalid_argument("invalid-model: initial distribution does not normalize");
}

prec_t OccupationPolytope::residual(const vec& rho) const {
    prec_t worst = 0.0;
    for (std::size_t r = 0; r < eq_rows.size(); ++r) {
        prec_t acc = -eq_rhs[r];
        for (const auto& [k, c] : eq_rows[r]) acc += c * rho[k];
        worst = std::max(worst, std::abs(acc));
    }
    for (prec_t v : rho) worst = std::max(worst, -v);
    return worst;
}

OccupationPolytope build_occupation_polytope(const MdpModel& mdp, const Tolerances& tol) {
    mdp.validate(tol);
    OccupationPolytope poly;
    const std::size_t nk = mdp.n_state_actions();
    poly.index.reserve(nk);
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(s); ++a) poly.index.emplace_back(s, a);

    const prec_t alpha = mdp.discount();
    poly.eq_rows.assign(mdp.n_states(), {});
    poly.eq_rhs.assign(mdp.n_states(), 0.0);
    for (std::size_t sp = 0; sp < mdp.n_states(); ++sp)
        poly.eq_rhs[sp] = (1.0 - alpha) * mdp.initial()[sp];
    // column (s,a) carries delta(s',s) - alpha p(s,a,s') at row s'
    for (std::size_t k = 0; k < nk; ++k) {
        const auto [s, a] = poly.index[k];
        std::vector<std::pair<std::size_t, prec_t>> entries;
        entries.emplace_back(s, 1.0);
        for (const auto& [sp, p] : mdp.transitions_from(s, a)) {
            bool merged = false;
            for (auto& [row, c] : entries)
                if (row == sp) {
                    c -= alpha * p;
                    merged = true;
                    break;
                }
            if (!merged) entries.emplace_back(sp, -alpha * p);
        }
        for (const auto& [row, c] : entries) poly.eq_rows[row].emplace_back(k, c);
    }
    return poly;
}

StationaryPolicy extract_policy(const MdpModel& mdp, const vec& rho) {
    if (rho.size() != mdp.n_state_actions())
        throw std::invalid_argument("extract_policy: occupation vector size mismatch");
    for (prec_t v : rho)
        if (v < -1e-10) throw std::invalid_argument("extract_policy: negative occupation mass");
    StationaryPolicy f;
    f.probs.resize(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        const std::size_t na = mdp.n_actions(s);
        f.probs[s].assign(na, 0.0);
        prec_t denom = 0.0;
        for (std::size_t a = 0; a < na; ++a)
            denom += std::max<prec_t>(rho[mdp.flat_index(s, a)], 0.0);
        if (denom < 1e-12) {
            for (std::size_t a = 0; a < na; ++a) f.probs[s][a] = 1.0 / static_cast<prec_t>(na);
        } else {
            for (std::size_t a = 0; a < na; ++a)
                f.probs[s][a] = std::max<prec_t>(rho[mdp.flat_index(s, a)], 0.0) / denom;
        }
    }
    return f;
}

vec sanitize_occupation(vec rho) {
    for (prec_t& v : rho) {
        if (v < -1e-5)
            throw std::invalid_argument("sanitize_occupation: occupation mass below -1e-5");
        if (v < 0.0) v = 0.0;
    }
    return rho;
}

NominalLpResult solve_nominal_lp(const MdpModel& mdp, const vec& reward) {
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    if (reward.size() != poly.n_vars())
        throw std::invalid_argument("solve_nominal_lp: reward vector size mismatch");
    ConeProgram p;
    p.n_vars = poly.n_vars();
    p.objective = reward;
    p.maximize = true;
    for (std::size_t r = 0; r < poly.n_rows(); ++r) {
        std::vector<std::pair<std::size_t, prec_t>> lhs(poly.eq_rows[r].begin(),
                                                        poly.eq_rows[r].end());
        p.add_eq_row(lhs, poly.eq_rhs[r]);
    }
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    for (std::size_t k = 0; k < p.n_vars; ++k) nn.emplace_back(k, k, -1.0);
    p.add_block(ConeKind::nonneg, p.n_vars, nn, vec(p.n_vars, 0.0));
    const SolveResult r = solve_continuous(p);
    if (r.status != SolveStatus::optimal)
        throw std::runtime_error("solver-failure: nominal LP ended with status " +
                                 to_string(r.status));
    return NominalLpResult{r.objective, r.primal};
}

vec induced_occupation(const MdpModel& mdp, const StationaryPolicy& policy) {
    // state frequencies d solve d' (I - alpha P_f) = (1-alpha) gamma',
    // then rho(s,a) = d(s) f(s,a).
    const std::size_t n = mdp.n_states();
    Matrix system(n, n);
    for (std::size_t s = 0; s < n; ++s) {
        system(s, s) += 1.0;
        for (std::size_t a = 0; a < mdp.n_actions(s); ++a) {
            const prec_t fa = policy.probs[s][a];
            if (fa == 0.0) continue;
            for (const auto& [sp, p] : mdp.transitions_from(s, a))
                system(sp, s) -= mdp.discount() * fa * p;  // transposed system
        }
    }
    // dense LU with partial pivoting
    vec d(n);
    for (std::size_t s = 0; s < n; ++s) d[s] = (1.0 - mdp.discount()) * mdp.initial()[s];
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(system(i, k)) > std::abs(system(piv, k))) piv = i;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(system(k, j), system(piv, j));
            std::swap(d[k], d[piv]);
        }
        const prec_t pivot = system(k, k);
        if (std::abs(pivot) < 1e-14)
            throw std::runtime_error("induced_occupation: singular visitation system");
        for (std::size_t i = k + 1; i < n; ++i) {
            const prec_t factor = system(i, k) / pivot;
            if (factor == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) system(i, j) -= factor * system(k, j);
            d[i] -= factor * d[k];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        prec_t acc = d[ii];
        for (std::size_t j = ii + 1; j < n; ++j) acc -= system(ii, j) * d[j];
        d[ii] = acc / system(ii, ii);
    }
    vec rho(mdp.n_state_actions(), 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < mdp.n_actions(s); ++a)
            rho[mdp.flat_index(s, a)] = d[s] * policy.probs[s][a];
    return rho;
}

}  // namespace drccmdp
