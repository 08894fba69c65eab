#include "drccmdp/moments.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace drccmdp {

std::string to_string(MomentKind k) {
    switch (k) {
    case MomentKind::d1: return "d1";
    case MomentKind::d2: return "d2";
    case MomentKind::d3: return "d3";
    }
    return "unknown";
}

void MomentAmbiguity::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("moment ambiguity: epsilon must lie in (0,1)");
    if (mu.size() != sigma.rows() || sigma.rows() != sigma.cols())
        throw std::invalid_argument("moment ambiguity: moment dimensions disagree");
    if (kind == MomentKind::d2 && !(delta0 > 0.0))
        throw std::domain_error("moment ambiguity: delta0 must be positive");
    if (kind == MomentKind::d3 && (!(delta1 >= 0.0) || !(delta2 > 0.0)))
        throw std::domain_error("moment ambiguity: need delta1 >= 0 and delta2 > 0");
}

prec_t kappa_for(const MomentAmbiguity& a) {
    if (!(a.epsilon > 0.0 && a.epsilon < 1.0))
        throw std::domain_error("kappa_for: epsilon must lie in (0,1)");
    const prec_t ratio = (1.0 - a.epsilon) / a.epsilon;
    switch (a.kind) {
    case MomentKind::d1: return std::sqrt(ratio);
    case MomentKind::d2: return std::sqrt(ratio * a.delta0);
    case MomentKind::d3: return std::sqrt(ratio * a.delta2) + std::sqrt(a.delta1);
    }
    throw std::logic_error("kappa_for: unreachable");
}

ConeProgram build_full_support_socp(const OccupationPolytope& poly, const MomentAmbiguity& a) {
    a.validate();
    if (a.support != SupportKind::full)
        throw std::invalid_argument("build_full_support_socp: ambiguity declares nonnegative support");
    return build_mean_risk_socp(poly, a.mu, a.sigma, kappa_for(a));
}

void approximate_cop_constraint(ConeProgram& p, std::size_t side,
                                const std::vector<AffineExpr>& entries) {
    const std::size_t d = svec_dim(side);
    if (entries.size() != d)
        throw std::invalid_argument("approximate_cop_constraint: need one entry per svec slot");
    const std::size_t p0 = p.n_vars;
    p.n_vars += d;
    p.objective.resize(p.n_vars, 0.0);
    // P psd
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> psd;
    for (std::size_t i = 0; i < d; ++i) psd.emplace_back(i, p0 + i, -1.0);
    p.add_block(ConeKind::psd, d, psd, vec(d, 0.0), side);
    // N = M - P >= 0 entrywise (lower triangle suffices by symmetry)
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    vec rhs(d, 0.0);
    std::size_t slot = 0;
    for (std::size_t c = 0; c < side; ++c)
        for (std::size_t r = c; r < side; ++r, ++slot) {
            const AffineExpr& e = entries[slot];
            for (const auto& [v, coef] : e.terms) nn.emplace_back(slot, v, -coef);
            nn.emplace_back(slot, p0 + slot, 1.0 / svec_scale(r, c));
            rhs[slot] = e.constant;
        }
    p.add_block(ConeKind::nonneg, d, nn, rhs);
}

namespace {

// lower-triangle (column major) index of the symmetric Q variables
std::size_t tri_index(std::size_t side, std::size_t i, std::size_t j) {
    return svec_index(side, i, j);
}

void add_terms(AffineExpr& e, std::size_t var, prec_t coef) {
    if (coef != 0.0) e.terms.emplace_back(var, coef);
}

}  // namespace

ConeProgram build_copositive_program(const OccupationPolytope& poly, const MomentAmbiguity& a,
                                     prec_t lambda, CopositiveLayout* layout_out) {
    a.validate();
    if (a.support != SupportKind::nonnegative)
        throw std::invalid_argument("build_copositive_program: ambiguity declares full support");
    if (!(lambda >= 0.0))
        throw std::domain_error("build_copositive_program: lambda must be nonnegative");
    const std::size_t nk = poly.n_vars();
    if (a.mu.size() != nk)
        throw std::invalid_argument("build_copositive_program: dimension mismatch");
    const std::size_t ntri = svec_dim(nk);

    CopositiveLayout lay;
    lay.n_k = nk;
    lay.rho0 = 0;
    lay.y = nk;
    lay.q_mat0 = nk + 1;
    lay.q_vec0 = lay.q_mat0 + ntri;
    lay.t = lay.q_vec0 + nk;
    lay.r = lay.t + (a.kind == MomentKind::d3 ? 1 : 0);

    ConeProgram p;
    p.n_vars = lay.t + 1 + (a.kind == MomentKind::d3 ? 1 : 0);
    p.objective.assign(p.n_vars, 0.0);
    p.objective[lay.y] = 1.0;
    p.maximize = true;

    // rho in the occupation polytope
    for (std::size_t r = 0; r < poly.n_rows(); ++r)
        p.add_eq_row({poly.eq_rows[r].begin(), poly.eq_rows[r].end()}, poly.eq_rhs[r]);
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    for (std::size_t k = 0; k < nk; ++k) nn.emplace_back(k, k, -1.0);
    p.add_block(ConeKind::nonneg, nk, nn, vec(nk, 0.0));

    const vec& mu = a.mu;
    auto qv = [&](std::size_t i, std::size_t j) { return lay.q_mat0 + tri_index(nk, i, j); };

    // Frobenius-product helper: terms of S o Q for symmetric S
    auto add_frobenius = [&](std::vector<std::pair<std::size_t, prec_t>>& terms,
                             const Matrix& smat, prec_t factor) {
        for (std::size_t i = 0; i < nk; ++i) {
            terms.emplace_back(qv(i, i), factor * smat(i, i));
            for (std::size_t j = 0; j < i; ++j)
                terms.emplace_back(qv(i, j), 2.0 * factor * smat(i, j));
        }
    };
    // terms of mu' Q mu
    auto add_mu_q_mu = [&](std::vector<std::pair<std::size_t, prec_t>>& terms, prec_t factor) {
        for (std::size_t i = 0; i < nk; ++i) {
            terms.emplace_back(qv(i, i), factor * mu[i] * mu[i]);
            for (std::size_t j = 0; j < i; ++j)
                terms.emplace_back(qv(i, j), 2.0 * factor * mu[i] * mu[j]);
        }
    };
    // (Q mu)_i as affine terms
    auto add_q_mu_row = [&](AffineExpr& e, std::size_t i, prec_t factor) {
        for (std::size_t j = 0; j < nk; ++j) add_terms(e, qv(std::max(i, j), std::min(i, j)), factor * mu[j]);
    };

    std::vector<AffineExpr> block2, block3;
    const std::size_t side = nk + 1;
    block2.resize(svec_dim(side));
    block3.resize(svec_dim(side));
    auto slot_of = [&](std::size_t r, std::size_t c) { return svec_index(side, r, c); };

    switch (a.kind) {
    case MomentKind::d1: {
        // (i)  -t - Q o Sigma - q' mu <= epsilon
        std::vector<std::pair<std::size_t, prec_t>> row;
        row.emplace_back(lay.t, -1.0);
        add_frobenius(row, a.sigma, -1.0);
        for (std::size_t i = 0; i < nk; ++i) row.emplace_back(lay.q_vec0 + i, -mu[i]);
        p.add_le_row(row, a.epsilon);
        // (ii) [[-Q, -q/2 + Q mu], [., -t - mu'Q mu]] copositive
        for (std::size_t c = 0; c < side; ++c)
            for (std::size_t r = c; r < side; ++r) {
                AffineExpr& e2 = block2[slot_of(r, c)];
                AffineExpr& e3 = block3[slot_of(r, c)];
                if (r < nk && c < nk) {
                    add_terms(e2, qv(r, c), -1.0);
                    add_terms(e3, qv(r, c), -1.0);
                } else if (r == nk && c < nk) {
                    add_terms(e2, lay.q_vec0 + c, -0.5);
                    add_q_mu_row(e2, c, 1.0);
                    add_terms(e3, lay.q_vec0 + c, -0.5);
                    add_q_mu_row(e3, c, 1.0);
                    // the Lagrangian term lambda rho'xi splits in half across
                    // the symmetric off-corner blocks
                    add_terms(e3, lay.rho0 + c, 0.5 * lambda);
                } else {  // corner
                    add_terms(e2, lay.t, -1.0);
                    add_mu_q_mu(e2.terms, -1.0);
                    add_terms(e3, lay.t, -1.0);
                    add_mu_q_mu(e3.terms, -1.0);
                    e3.constant = -1.0;
                    add_terms(e3, lay.y, -lambda);
                }
            }
        approximate_cop_constraint(p, side, block2);
        approximate_cop_constraint(p, side, block3);
        break;
    }
    case MomentKind::d2: {
        // (i)  -t - mu'q - mu'Q mu + delta0 Sigma o Q <= epsilon
        std::vector<std::pair<std::size_t, prec_t>> row;
        row.emplace_back(lay.t, -1.0);
        for (std::size_t i = 0; i < nk; ++i) row.emplace_back(lay.q_vec0 + i, -mu[i]);
        add_mu_q_mu(row, -1.0);
        add_frobenius(row, a.sigma, a.delta0);
        p.add_le_row(row, a.epsilon);
        // (ii) [[Q, -q/2 - Q mu], [., -t]]; (iii) adds lambda rho / lambda y
        for (std::size_t c = 0; c < side; ++c)
            for (std::size_t r = c; r < side; ++r) {
                AffineExpr& e2 = block2[slot_of(r, c)];
                AffineExpr& e3 = block3[slot_of(r, c)];
                if (r < nk && c < nk) {
                    add_terms(e2, qv(r, c), 1.0);
                    add_terms(e3, qv(r, c), 1.0);
                } else if (r == nk && c < nk) {
                    add_terms(e2, lay.q_vec0 + c, -0.5);
                    add_q_mu_row(e2, c, -1.0);
                    add_terms(e3, lay.q_vec0 + c, -0.5);
                    add_terms(e3, lay.rho0 + c, 0.5 * lambda);
                    add_q_mu_row(e3, c, -1.0);
                } else {
                    add_terms(e2, lay.t, -1.0);
                    add_terms(e3, lay.t, -1.0);
                    e3.constant = -1.0;
                    add_terms(e3, lay.y, -lambda);
                }
            }
        approximate_cop_constraint(p, side, block2);
        approximate_cop_constraint(p, side, block3);
        // (iv) Q psd
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> psd;
        for (std::size_t c = 0; c < nk; ++c)
            for (std::size_t r = c; r < nk; ++r)
                psd.emplace_back(svec_index(nk, r, c), qv(r, c), -svec_scale(r, c));
        p.add_block(ConeKind::psd, svec_dim(nk), psd, vec(svec_dim(nk), 0.0), nk);
        break;
    }
    case MomentKind::d3: {
        // (i) r + t <= epsilon
        p.add_le_row({{lay.r, 1.0}, {lay.t, 1.0}}, a.epsilon);
        // (iii) t >= (delta2 Sigma + mu mu') o Q + mu' q
        //            + sqrt(delta1) || Sigma^{1/2} (q + 2 Q mu) ||
        Matrix chol = a.sigma;
        try {
            cholesky_inplace(chol);
        } catch (const std::runtime_error&) {
            throw std::runtime_error("cholesky-failure: covariance not positive definite");
        }
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
        // s0 = t - (delta2 Sigma + mu mu') o Q - mu' q
        {
            AffineExpr s0;
            add_terms(s0, lay.t, 1.0);
            std::vector<std::pair<std::size_t, prec_t>> fr;
            add_frobenius(fr, a.sigma, a.delta2);
            add_mu_q_mu(fr, 1.0);
            for (auto& [v, c] : fr) add_terms(s0, v, -c);
            for (std::size_t i = 0; i < nk; ++i) add_terms(s0, lay.q_vec0 + i, -mu[i]);
            for (auto& [v, c] : s0.terms) soc.emplace_back(0, v, -c);
        }
        // s_i = sqrt(delta1) * (L' (q + 2 Q mu))_i
        const prec_t sq1 = std::sqrt(a.delta1);
        for (std::size_t i = 0; i < nk; ++i) {
            AffineExpr si;
            for (std::size_t k = i; k < nk; ++k) {
                const prec_t lki = chol(k, i);
                if (lki == 0.0) continue;
                add_terms(si, lay.q_vec0 + k, sq1 * lki);
                for (std::size_t j = 0; j < nk; ++j)
                    add_terms(si, qv(std::max(k, j), std::min(k, j)), 2.0 * sq1 * lki * mu[j]);
            }
            for (auto& [v, c] : si.terms) soc.emplace_back(1 + i, v, -c);
        }
        p.add_block(ConeKind::second_order, nk + 1, soc, vec(nk + 1, 0.0));
        // (ii) [[Q, q/2], [q'/2, r]]; (iv) adds lambda rho / lambda y
        for (std::size_t c = 0; c < side; ++c)
            for (std::size_t r = c; r < side; ++r) {
                AffineExpr& e2 = block2[slot_of(r, c)];
                AffineExpr& e3 = block3[slot_of(r, c)];
                if (r < nk && c < nk) {
                    add_terms(e2, qv(r, c), 1.0);
                    add_terms(e3, qv(r, c), 1.0);
                } else if (r == nk && c < nk) {
                    add_terms(e2, lay.q_vec0 + c, 0.5);
                    add_terms(e3, lay.q_vec0 + c, 0.5);
                    add_terms(e3, lay.rho0 + c, 0.5 * lambda);
                } else {
                    add_terms(e2, lay.r, 1.0);
                    add_terms(e3, lay.r, 1.0);
                    e3.constant = -1.0;
                    add_terms(e3, lay.y, -lambda);
                }
            }
        approximate_cop_constraint(p, side, block2);
        approximate_cop_constraint(p, side, block3);
        // (v) Q psd
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> psd;
        for (std::size_t c = 0; c < nk; ++c)
            for (std::size_t r = c; r < nk; ++r)
                psd.emplace_back(svec_index(nk, r, c), qv(r, c), -svec_scale(r, c));
        p.add_block(ConeKind::psd, svec_dim(nk), psd, vec(svec_dim(nk), 0.0), nk);
        break;
    }
    }
    if (layout_out) *layout_out = lay;
    return p;
}

namespace {

DrccmdpSolution socp_to_solution(const MdpModel& mdp, const SolveResult& r) {
    DrccmdpSolution sol;
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.wall_seconds = r.wall_seconds;
    sol.certified = r.certified;
    sol.message = r.message;
    if (r.status == SolveStatus::optimal) {
        sol.y = r.objective;
        sol.rho = sanitize_occupation(
            vec(r.primal.begin(), r.primal.begin() + mdp.n_state_actions()));
        sol.policy = extract_policy(mdp, sol.rho);
    }
    return sol;
}

}  // namespace

DrccmdpSolution solve_full_support_moments(const MdpModel& mdp, const MomentAmbiguity& a) {
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    const ConeProgram p = build_full_support_socp(poly, a);
    return socp_to_solution(mdp, solve_continuous(p));
}

DrccmdpSolution solve_gaussian_ccmdp(const MdpModel& mdp, const vec& mu, const Matrix& sigma,
                                     prec_t epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5))
        throw std::domain_error("solve_gaussian_ccmdp: epsilon must lie in (0, 1/2)");
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    const ConeProgram p = build_mean_risk_socp(poly, mu, sigma, normal_quantile(1.0 - epsilon));
    return socp_to_solution(mdp, solve_continuous(p));
}

DrccmdpSolution solve_moments_nonnegative(const MdpModel& mdp, const MomentAmbiguity& a) {
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    SolverOptions opts;

    DrccmdpSolution best;
    best.status = SolveStatus::infeasible;
    best.y = -std::numeric_limits<prec_t>::infinity();
    std::size_t failures = 0;

    auto eval = [&](prec_t lambda) -> prec_t {
        const ConeProgram p = build_copositive_program(poly, a, lambda);
        const SolveResult r = solve_continuous(p, opts);
        if (r.status != SolveStatus::optimal) {
            if (r.status == SolveStatus::numerical_failure) ++failures;
            return -std::numeric_limits<prec_t>::infinity();
        }
        if (r.objective > best.y) {
            best = socp_to_solution(mdp, r);
            best.lambda_opt = lambda;
        }
        return r.objective;
    };

    // coarse log grid: {0} plus 24 points in [1e-3, 1e3]
    vec grid{0.0};
    const std::size_t npts = 24;
    for (std::size_t i = 0; i < npts; ++i)
        grid.push_back(std::pow(10.0, -3.0 + 6.0 * static_cast<prec_t>(i) / (npts - 1)));
    vec vals(grid.size());
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        vals[i] = eval(grid[i]);
        if (vals[i] > vals[best_idx]) best_idx = i;
    }
    if (!std::isfinite(vals[best_idx])) {
        best.message = failures ? "backend failures on every lambda" : "infeasible for every lambda";
        best.status = failures ? SolveStatus::numerical_failure : SolveStatus::infeasible;
        return best;
    }
    if (best_idx + 1 == grid.size()) {
        best.warnings.push_back("lambda search hit the upper grid boundary; bracket expanded once");
        const prec_t last = grid.back();
        for (prec_t mult : {3.16227766016838, 10.0, 31.6227766016838, 100.0}) {
            grid.push_back(last * mult);
            vals.push_back(eval(grid.back()));
            if (vals.back() > vals[best_idx]) best_idx = vals.size() - 1;
        }
    }

    // golden-section refinement on the bracket around the best grid point
    prec_t lo = best_idx == 0 ? 0.0 : grid[best_idx - 1];
    prec_t hi = best_idx + 1 < grid.size() ? grid[best_idx + 1] : grid[best_idx];
    if (hi > lo) {
        const prec_t invphi = 0.6180339887498949;
        prec_t x1 = hi - invphi * (hi - lo);
        prec_t x2 = lo + invphi * (hi - lo);
        prec_t f1 = eval(x1), f2 = eval(x2);
        for (int it = 0; it < 18; ++it) {
            if (f1 >= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - invphi * (hi - lo);
                f1 = eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + invphi * (hi - lo);
                f2 = eval(x2);
            }
        }
    }
    if (best.status == SolveStatus::optimal) best.rounds = grid.size();
    return best;
}

}  // namespace drccmdp
