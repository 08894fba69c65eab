#include "drccmdp/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drccmdp {

namespace {
constexpr prec_t kInf = std::numeric_limits<prec_t>::infinity();
}

void WassersteinAmbiguity::validate() const {
    if (order != 1)
        throw std::invalid_argument("wasserstein ambiguity: only order p = 1 is supported");
    if (!(theta > 0.0)) throw std::domain_error("wasserstein ambiguity: theta must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("wasserstein ambiguity: epsilon must lie in (0,1)");
    if (scenarios.count() == 0)
        throw std::invalid_argument("wasserstein ambiguity: need at least one scenario");
    for (std::size_t i = 0; i < scenarios.count(); ++i)
        for (std::size_t k = 0; k < scenarios.dim(); ++k) {
            const prec_t v = scenarios.data(i, k);
            if (!std::isfinite(v))
                throw std::invalid_argument("wasserstein ambiguity: scenario entries must be finite");
            if (support == SupportKind::nonnegative && v < 0.0)
                throw std::invalid_argument(
                    "wasserstein ambiguity: nonnegative support requires nonnegative scenarios");
        }
}

prec_t projection_distance(const vec& xi, const vec& rho, prec_t y) {
    if (xi.size() != rho.size())
        throw std::invalid_argument("projection_distance: dimension mismatch");
    const prec_t nrm = norm2(rho);
    if (nrm < 1e-300) throw std::invalid_argument("projection_distance: rho must be nonzero");
    return std::max<prec_t>(0.0, (dot(rho, xi) - y) / nrm);
}

namespace {

// distance from xi to {z >= 0, rho'z <= y}; the projection is
// z(nu) = max(0, xi - nu rho) with nu solving rho'z(nu) = y. Returns the
// distance; nu_out receives the multiplier (0 when already feasible).
prec_t nonneg_projection(const vec& xi, const vec& rho, prec_t y, prec_t* nu_out) {
    const std::size_t n = xi.size();
    if (rho.size() != n)
        throw std::invalid_argument("nonnegative_projection_distance: dimension mismatch");
    if (norm2(rho) < 1e-300)
        throw std::invalid_argument("nonnegative_projection_distance: rho must be nonzero");
    auto clip = [&](prec_t nu, std::size_t i) { return std::max<prec_t>(0.0, xi[i] - nu * rho[i]); };
    auto g = [&](prec_t nu) {
        prec_t acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += rho[i] * clip(nu, i);
        return acc;
    };
    if (nu_out) *nu_out = 0.0;
    if (g(0.0) <= y) {
        prec_t dist0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const prec_t miss = std::min<prec_t>(xi[i], 0.0);
            dist0 += miss * miss;
        }
        return std::sqrt(dist0);
    }
    // g is piecewise linear and nonincreasing; walk its breakpoints
    vec bps;
    for (std::size_t i = 0; i < n; ++i)
        if (rho[i] != 0.0) {
            const prec_t nu = xi[i] / rho[i];
            if (nu > 0.0 && std::isfinite(nu)) bps.push_back(nu);
        }
    std::sort(bps.begin(), bps.end());
    prec_t lo = 0.0, glo = g(0.0);
    prec_t nustar = -1.0;
    for (prec_t bp : bps) {
        const prec_t ghi = g(bp);
        if (ghi <= y) {
            nustar = (glo - ghi) < 1e-300 ? bp : lo + (glo - y) / (glo - ghi) * (bp - lo);
            break;
        }
        lo = bp;
        glo = ghi;
    }
    if (nustar < 0.0) {
        prec_t slope = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (rho[i] < 0.0) slope -= rho[i] * rho[i];
        if (!(slope < -1e-300)) return kInf;  // g never reaches y: empty set
        nustar = lo + (glo - y) / (-slope);
    }
    if (nu_out) *nu_out = nustar;
    prec_t dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const prec_t diff = xi[i] - clip(nustar, i);
        dist += diff * diff;
    }
    return std::sqrt(dist);
}

}  // namespace

prec_t nonnegative_projection_distance(const vec& xi, const vec& rho, prec_t y) {
    return nonneg_projection(xi, rho, y, nullptr);
}

prec_t big_m(const WassersteinAmbiguity& a) {
    if (a.scenarios.count() == 0) throw std::invalid_argument("big_m: scenarios empty");
    prec_t maxnrm = 0.0;
    for (std::size_t i = 0; i < a.scenarios.count(); ++i) {
        prec_t acc = 0.0;
        for (std::size_t k = 0; k < a.scenarios.dim(); ++k)
            acc += a.scenarios.data(i, k) * a.scenarios.data(i, k);
        maxnrm = std::max(maxnrm, std::sqrt(acc));
    }
    return a.theta / a.epsilon + 2.0 * maxnrm;
}

ConeProgram build_misocp(const OccupationPolytope& poly, const WassersteinAmbiguity& a,
                         MisocpLayout* layout_out) {
    a.validate();
    if (a.support != SupportKind::full)
        throw std::invalid_argument("build_misocp: ambiguity declares nonnegative support");
    const std::size_t nk = poly.n_vars();
    if (a.scenarios.dim() != nk) throw std::invalid_argument("build_misocp: dimension mismatch");
    const std::size_t h = a.scenarios.count();
    const prec_t bigm = big_m(a);
    const prec_t ratio = a.theta / a.epsilon;

    MisocpLayout lay;
    lay.n_k = nk;
    lay.n_scen = h;
    lay.rho0 = 0;
    lay.y = nk;
    lay.beta = nk + 1;
    lay.t = nk + 2;
    lay.w = nk + 3;
    lay.b0 = nk + 4;
    lay.eta0 = nk + 4 + h;

    ConeProgram p;
    p.n_vars = nk + 4 + 2 * h;
    p.objective.assign(p.n_vars, 0.0);
    p.objective[lay.y] = 1.0;
    p.maximize = true;
    for (std::size_t i = 0; i < h; ++i) p.binaries.push_back(lay.eta0 + i);

    // rho in the polytope
    for (std::size_t r = 0; r < poly.n_rows(); ++r)
        p.add_eq_row({poly.eq_rows[r].begin(), poly.eq_rows[r].end()}, poly.eq_rhs[r]);

    // (i) beta theta - (1/H) sum b_i <= t epsilon
    {
        std::vector<std::pair<std::size_t, prec_t>> row;
        row.emplace_back(lay.beta, a.theta);
        for (std::size_t i = 0; i < h; ++i) row.emplace_back(lay.b0 + i, -1.0 / h);
        row.emplace_back(lay.t, -a.epsilon);
        p.add_le_row(row, 0.0);
    }
    // one batched nonneg block: rho >= 0, t >= 0, beta >= 1e-9, b_i <= 0,
    // 0 <= eta_i <= 1, w <= wcap, and the indicator rows (ii)/(iii) plus the
    // relaxed lower-bound rows
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    vec rhs;
    std::size_t rr = 0;
    auto ge0 = [&](std::size_t v) {
        nn.emplace_back(rr, v, -1.0);
        rhs.push_back(0.0);
        ++rr;
    };
    for (std::size_t k = 0; k < nk; ++k) ge0(lay.rho0 + k);
    ge0(lay.t);
    nn.emplace_back(rr, lay.beta, -1.0);
    rhs.push_back(-1e-9);  // beta >= 1e-9 stands in for beta > 0
    ++rr;
    const prec_t wcap = bigm + ratio + 1.0;
    nn.emplace_back(rr, lay.w, 1.0);
    rhs.push_back(wcap);
    ++rr;
    for (std::size_t i = 0; i < h; ++i) {
        nn.emplace_back(rr, lay.b0 + i, 1.0);  // b_i <= 0
        rhs.push_back(0.0);
        ++rr;
        nn.emplace_back(rr, lay.eta0 + i, -1.0);  // eta_i >= 0
        rhs.push_back(0.0);
        ++rr;
        nn.emplace_back(rr, lay.eta0 + i, 1.0);  // eta_i <= 1
        rhs.push_back(1.0);
        ++rr;
        // (ii) b_i + t - M eta_i <= 0
        nn.emplace_back(rr, lay.b0 + i, 1.0);
        nn.emplace_back(rr, lay.t, 1.0);
        nn.emplace_back(rr, lay.eta0 + i, -bigm);
        rhs.push_back(0.0);
        ++rr;
        // (iii) b_i + t + M eta_i + y - rho'xi_i <= M
        nn.emplace_back(rr, lay.b0 + i, 1.0);
        nn.emplace_back(rr, lay.t, 1.0);
        nn.emplace_back(rr, lay.eta0 + i, bigm);
        nn.emplace_back(rr, lay.y, 1.0);
        for (std::size_t k = 0; k < nk; ++k)
            nn.emplace_back(rr, lay.rho0 + k, -a.scenarios.data(i, k));
        rhs.push_back(bigm);
        ++rr;
        // relaxed lower-bound row: rho'xi_i - y - w - M(1 - eta_i) <= 0
        nn.emplace_back(rr, lay.y, -1.0);
        nn.emplace_back(rr, lay.w, -1.0);
        nn.emplace_back(rr, lay.eta0 + i, bigm);
        for (std::size_t k = 0; k < nk; ++k)
            nn.emplace_back(rr, lay.rho0 + k, a.scenarios.data(i, k));
        rhs.push_back(bigm);
        ++rr;
    }
    p.add_block(ConeKind::nonneg, rr, nn, rhs);

    // (v) ||rho|| <= beta
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
    soc.emplace_back(0, lay.beta, -1.0);
    for (std::size_t k = 0; k < nk; ++k) soc.emplace_back(1 + k, lay.rho0 + k, -1.0);
    p.add_block(ConeKind::second_order, nk + 1, soc, vec(nk + 1, 0.0));
    // w >= (theta/eps) ||rho||
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> socw;
    socw.emplace_back(0, lay.w, -1.0);
    for (std::size_t k = 0; k < nk; ++k) socw.emplace_back(1 + k, lay.rho0 + k, -ratio);
    p.add_block(ConeKind::second_order, nk + 1, socw, vec(nk + 1, 0.0));

    if (layout_out) *layout_out = lay;
    return p;
}

BiconvexProgram build_biconvex(const OccupationPolytope& poly, const WassersteinAmbiguity& a) {
    a.validate();
    if (a.support != SupportKind::nonnegative)
        throw std::invalid_argument("build_biconvex: ambiguity declares full support");
    if (a.scenarios.dim() != poly.n_vars())
        throw std::invalid_argument("build_biconvex: dimension mismatch");
    return BiconvexProgram{poly, a};
}

ScenarioDual solve_scenario_dual(const vec& xi, const vec& rho, prec_t y) {
    const std::size_t n = xi.size();
    ScenarioDual out;
    out.zeta.assign(n, 0.0);
    prec_t nu = 0.0;
    const prec_t d = nonneg_projection(xi, rho, y, &nu);
    if (!(d > 0.0)) {
        out.value = 0.0;
        return out;  // lambda = 0, zeta = 0 attains the zero distance
    }
    if (std::isinf(d)) {
        // empty halfspace-orthant intersection: the dual is unbounded; report
        // infinity so callers treat the scenario as never reachable
        out.value = kInf;
        return out;
    }
    // KKT recovery: lambda = nu / d, zeta = lambda rho - (xi - z*)/d
    out.lambda = nu / d;
    for (std::size_t i = 0; i < n; ++i) {
        const prec_t zi = std::max<prec_t>(0.0, xi[i] - nu * rho[i]);
        out.zeta[i] = out.lambda * rho[i] - (xi[i] - zi) / d;
        if (out.zeta[i] < 0.0) out.zeta[i] = 0.0;  // clip multiplier round-off
    }
    out.value = out.lambda * (dot(rho, xi) - y) - dot(out.zeta, xi);
    return out;
}

ConeProgram build_scenario_dual_socp(const vec& xi, const vec& rho, prec_t y) {
    const std::size_t n = xi.size();
    ConeProgram p;
    p.n_vars = 1 + n;  // lambda, zeta
    p.objective.assign(p.n_vars, 0.0);
    p.maximize = true;
    p.objective[0] = dot(rho, xi) - y;
    for (std::size_t i = 0; i < n; ++i) p.objective[1 + i] = -xi[i];
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    for (std::size_t i = 0; i <= n; ++i) nn.emplace_back(i, i, -1.0);
    p.add_block(ConeKind::nonneg, n + 1, nn, vec(n + 1, 0.0));
    // || zeta - lambda rho || <= 1
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
    vec rhs(n + 1, 0.0);
    rhs[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        soc.emplace_back(1 + i, 1 + i, 1.0);
        if (rho[i] != 0.0) soc.emplace_back(1 + i, 0, -rho[i]);
    }
    p.add_block(ConeKind::second_order, n + 1, soc, rhs);
    return p;
}

ConeProgram build_biconvex_primal_step(const BiconvexProgram& bp,
                                       const std::vector<ScenarioDual>& duals) {
    const std::size_t nk = bp.poly.n_vars();
    const std::size_t h = bp.ambiguity.scenarios.count();
    if (duals.size() != h)
        throw std::invalid_argument("build_biconvex_primal_step: one dual per scenario required");
    ConeProgram p;
    const std::size_t y = nk, l = nk + 1, g0 = nk + 2;
    p.n_vars = nk + 2 + h;
    p.objective.assign(p.n_vars, 0.0);
    p.objective[y] = 1.0;
    p.maximize = true;
    for (std::size_t r = 0; r < bp.poly.n_rows(); ++r)
        p.add_eq_row({bp.poly.eq_rows[r].begin(), bp.poly.eq_rows[r].end()}, bp.poly.eq_rhs[r]);
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    vec rhs;
    std::size_t rr = 0;
    for (std::size_t k = 0; k < nk; ++k) {
        nn.emplace_back(rr, k, -1.0);
        rhs.push_back(0.0);
        ++rr;
    }
    nn.emplace_back(rr, l, -1.0);  // l >= 1e-9 stands in for l > 0
    rhs.push_back(-1e-9);
    ++rr;
    for (std::size_t i = 0; i < h; ++i) {
        nn.emplace_back(rr, g0 + i, 1.0);  // g_i <= 0
        rhs.push_back(0.0);
        ++rr;
    }
    // (i) theta - (1/H) sum g_i <= l epsilon
    for (std::size_t i = 0; i < h; ++i) nn.emplace_back(rr, g0 + i, -1.0 / h);
    nn.emplace_back(rr, l, -bp.ambiguity.epsilon);
    rhs.push_back(-bp.ambiguity.theta);
    ++rr;
    // (ii) lambda_i (rho'xi - y) - zeta_i'xi >= l + g_i
    for (std::size_t i = 0; i < h; ++i) {
        const vec xi = bp.ambiguity.scenarios.row_vec(i);
        const ScenarioDual& du = duals[i];
        nn.emplace_back(rr, l, 1.0);
        nn.emplace_back(rr, g0 + i, 1.0);
        nn.emplace_back(rr, y, du.lambda);
        for (std::size_t k = 0; k < nk; ++k)
            if (du.lambda * xi[k] != 0.0) nn.emplace_back(rr, k, -du.lambda * xi[k]);
        rhs.push_back(-dot(du.zeta, xi));
        ++rr;
    }
    p.add_block(ConeKind::nonneg, rr, nn, rhs);
    // (iii) || zeta_i - lambda_i rho || <= 1 per scenario
    for (std::size_t i = 0; i < h; ++i) {
        const ScenarioDual& du = duals[i];
        std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
        vec srhs(nk + 1, 0.0);
        srhs[0] = 1.0;
        for (std::size_t k = 0; k < nk; ++k) {
            srhs[1 + k] = du.zeta[k];
            if (du.lambda != 0.0) soc.emplace_back(1 + k, k, du.lambda);
        }
        p.add_block(ConeKind::second_order, nk + 1, soc, srhs);
    }
    return p;
}

prec_t wasserstein_worst_case_prob(const vec& rho, prec_t y, const WassersteinAmbiguity& a) {
    if (norm2(rho) < 1e-300)
        throw std::invalid_argument("wasserstein_worst_case_prob: rho must be nonzero");
    const std::size_t h = a.scenarios.count();
    vec d(h);
    for (std::size_t i = 0; i < h; ++i) {
        const vec xi = a.scenarios.row_vec(i);
        d[i] = a.support == SupportKind::full ? projection_distance(xi, rho, y)
                                              : nonnegative_projection_distance(xi, rho, y);
    }
    auto objective = [&](prec_t lam) {
        prec_t acc = lam * a.theta;
        for (std::size_t i = 0; i < h; ++i) {
            if (std::isinf(d[i])) continue;  // never reachable by transport
            acc += std::max<prec_t>(0.0, 1.0 - lam * d[i]) / h;
        }
        return acc;
    };
    prec_t best = objective(0.0);
    for (std::size_t i = 0; i < h; ++i)
        if (d[i] > 0.0 && std::isfinite(d[i])) best = std::min(best, objective(1.0 / d[i]));
    return std::min<prec_t>(best, 1.0);
}

namespace {

DrccmdpSolution result_to_solution(const MdpModel& mdp, const SolveResult& r,
                                   const MisocpLayout& lay) {
    DrccmdpSolution sol;
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.nodes = r.nodes;
    sol.wall_seconds = r.wall_seconds;
    sol.certified = r.certified;
    sol.message = r.message;
    if (r.status == SolveStatus::optimal || r.status == SolveStatus::node_limit) {
        if (!r.primal.empty()) {
            sol.y = r.objective;
            sol.rho = sanitize_occupation(
                vec(r.primal.begin() + lay.rho0, r.primal.begin() + lay.rho0 + lay.n_k));
            sol.policy = extract_policy(mdp, sol.rho);
        }
    }
    return sol;
}

}  // namespace

namespace {

// largest y the exact worst-case oracle accepts at this rho
prec_t oracle_max_y(const vec& rho, const WassersteinAmbiguity& a) {
    prec_t lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < a.scenarios.count(); ++i) {
        const prec_t v = dot(rho, a.scenarios.row_vec(i));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    lo -= a.theta / a.epsilon * norm2(rho) + 1.0;
    for (int it = 0; it < 100; ++it) {
        const prec_t mid = 0.5 * (lo + hi);
        if (wasserstein_worst_case_prob(rho, mid, a) <= a.epsilon) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace

DrccmdpSolution solve_wasserstein_full(const MdpModel& mdp, const WassersteinAmbiguity& a,
                                       const SolverOptions& opts) {
    const OccupationPolytope poly = build_occupation_polytope(mdp);
    MisocpLayout lay;
    ConeProgram p = build_misocp(poly, a, &lay);
    const std::size_t h = lay.n_scen;

    // Node-relaxation strengthening: rows valid for every integral-feasible
    // point, so the mixed-integer optimum is untouched while the fractional
    // big-M slack shrinks.
    {
        // (a) cardinality: at any feasible point at most eps H scenarios can
        //     run with eta_i = 0 (from rows (i)-(ii) with t >= beta theta/eps)
        const prec_t min_on = std::ceil(static_cast<prec_t>(h) * (1.0 - a.epsilon));
        std::vector<std::pair<std::size_t, prec_t>> card;
        for (std::size_t i = 0; i < h; ++i) card.emplace_back(lay.eta0 + i, 1.0);
        p.add_ge_row(card, min_on);
        // (b) quantile bound: v_i <= max_j xi_ij because rho is a probability
        //     vector, and at most eps H scenarios may fall at or below y
        vec umax(h);
        for (std::size_t i = 0; i < h; ++i) {
            prec_t mx = -kInf;
            for (std::size_t k = 0; k < lay.n_k; ++k) mx = std::max(mx, a.scenarios.data(i, k));
            umax[i] = mx;
        }
        vec sorted = umax;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t cut_idx = std::min<std::size_t>(
            static_cast<std::size_t>(std::floor(a.epsilon * static_cast<prec_t>(h))),
            h - 1);
        const prec_t yub = sorted[cut_idx];
        p.add_le_row({{lay.y, 1.0}}, yub);
        // (c) per-scenario unconditional rows: b_i + t <= v_i - y + (yub - vmin_i)+
        for (std::size_t i = 0; i < h; ++i) {
            prec_t mn = kInf;
            for (std::size_t k = 0; k < lay.n_k; ++k) mn = std::min(mn, a.scenarios.data(i, k));
            const prec_t slack = std::max<prec_t>(0.0, yub - mn);
            std::vector<std::pair<std::size_t, prec_t>> row;
            row.emplace_back(lay.b0 + i, 1.0);
            row.emplace_back(lay.t, 1.0);
            row.emplace_back(lay.y, 1.0);
            for (std::size_t k = 0; k < lay.n_k; ++k)
                row.emplace_back(lay.rho0 + k, -a.scenarios.data(i, k));
            p.add_le_row(row, slack);
        }
    }

    // Incumbent heuristic: bisect the oracle-maximal y at a candidate rho
    // and replay the indicator pattern eta_i = 1{rho'xi_i >= y}. Candidates
    // come from the node relaxation and from a mean-risk SOCP on the
    // empirical scenario moments (the statistical-distance solutions track
    // the latter closely at small radii).
    auto pattern_of = [&](const vec& rho, prec_t ystar) {
        std::vector<prec_t> assign(h);
        for (std::size_t i = 0; i < h; ++i)
            assign[i] = dot(rho, a.scenarios.row_vec(i)) >= ystar ? 1.0 : 0.0;
        return assign;
    };
    std::vector<prec_t> moment_pattern;
    {
        const std::size_t nk = lay.n_k;
        vec mu_hat(nk, 0.0);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t k = 0; k < nk; ++k) mu_hat[k] += a.scenarios.data(i, k) / h;
        Matrix sig_hat(nk, nk);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t r = 0; r < nk; ++r) {
                const prec_t dr = a.scenarios.data(i, r) - mu_hat[r];
                for (std::size_t c = 0; c <= r; ++c)
                    sig_hat(r, c) += dr * (a.scenarios.data(i, c) - mu_hat[c]) / h;
            }
        for (std::size_t r = 0; r < nk; ++r) {
            sig_hat(r, r) += 1e-6;
            for (std::size_t c = 0; c < r; ++c) sig_hat(c, r) = sig_hat(r, c);
        }
        try {
            const ConeProgram gp =
                build_mean_risk_socp(poly, mu_hat, sig_hat, normal_quantile(1.0 - a.epsilon));
            const SolveResult gr = solve_continuous(gp, opts);
            if (gr.status == SolveStatus::optimal) {
                vec rho_g(gr.primal.begin(), gr.primal.begin() + nk);
                for (auto& v : rho_g) v = std::max<prec_t>(v, 0.0);
                if (norm2(rho_g) > 1e-12)
                    moment_pattern = pattern_of(rho_g, oracle_max_y(rho_g, a));
            }
        } catch (const std::exception&) {
            // proxy candidate is optional
        }
    }
    bool first_call = true;
    std::vector<std::vector<prec_t>> tried;
    auto fresh = [&](const std::vector<prec_t>& pat) {
        for (const auto& t : tried)
            if (t == pat) return false;
        tried.push_back(pat);
        return true;
    };
    auto heuristic = [&](const ConeProgram& prog, const vec& relax) {
        (void)prog;
        std::vector<std::vector<prec_t>> out;
        vec rho(relax.begin() + lay.rho0, relax.begin() + lay.rho0 + lay.n_k);
        for (auto& v : rho) v = std::max<prec_t>(v, 0.0);
        if (norm2(rho) > 1e-12) {
            auto pat = pattern_of(rho, oracle_max_y(rho, a));
            if (fresh(pat)) out.push_back(std::move(pat));
        }
        if (first_call && !moment_pattern.empty() && fresh(moment_pattern))
            out.push_back(moment_pattern);
        first_call = false;
        return out;
    };
    SolveResult r = solve_misocp(p, opts, heuristic);

    // pattern fixed-point polish on the incumbent
    if ((r.status == SolveStatus::optimal || r.status == SolveStatus::node_limit) &&
        !r.primal.empty()) {
        std::vector<prec_t> pattern;
        const std::size_t keep_nodes = r.nodes;
        for (int round = 0; round < 2; ++round) {
            vec rho(r.primal.begin() + lay.rho0, r.primal.begin() + lay.rho0 + lay.n_k);
            for (auto& v : rho) v = std::max<prec_t>(v, 0.0);
            std::vector<prec_t> next = pattern_of(rho, oracle_max_y(rho, a));
            if (next == pattern || !fresh(next)) break;
            pattern = next;
            ConeProgram q = p;
            for (std::size_t i = 0; i < h; ++i) q.pinned.emplace_back(lay.eta0 + i, pattern[i]);
            const SolveResult rr = solve_continuous(q, opts);
            if (rr.status == SolveStatus::optimal && rr.objective > r.objective + 1e-12) {
                const SolveStatus keep = r.status;
                const bool cert = r.certified;
                const std::string msg = r.message;
                r = rr;
                r.status = keep;
                r.certified = cert;
                r.message = msg;
            } else {
                break;
            }
        }
        r.nodes = keep_nodes;
    }
    DrccmdpSolution sol = result_to_solution(mdp, r, lay);
    if (!sol.rho.empty() && norm2(sol.rho) > 1e-12) {
        // snap y to the exact oracle-certified level at the returned measure
        sol.y = oracle_max_y(sol.rho, a);
    }
    return sol;
}

DrccmdpSolution solve_wasserstein_nonnegative(const MdpModel& mdp, const WassersteinAmbiguity& a,
                                              const SolverOptions& opts, std::size_t max_rounds) {
    a.validate();
    WassersteinAmbiguity full = a;
    full.support = SupportKind::full;
    DrccmdpSolution init = solve_wasserstein_full(mdp, full, opts);
    if ((init.status != SolveStatus::optimal && init.status != SolveStatus::node_limit) ||
        init.rho.empty())
        return init;

    const OccupationPolytope poly = build_occupation_polytope(mdp);
    const BiconvexProgram bp = build_biconvex(poly, a);
    vec rho = init.rho;
    prec_t y = init.y;

    DrccmdpSolution sol;
    sol.nodes = init.nodes;
    std::size_t round = 0;
    bool converged = false;
    for (; round < max_rounds; ++round) {
        std::vector<ScenarioDual> duals(a.scenarios.count());
        for (std::size_t i = 0; i < a.scenarios.count(); ++i)
            duals[i] = solve_scenario_dual(a.scenarios.row_vec(i), rho, y);
        const ConeProgram step = build_biconvex_primal_step(bp, duals);
        const SolveResult r = solve_continuous(step, opts);
        if (r.status != SolveStatus::optimal) {
            sol.status = r.status;
            sol.message = "alternating search: primal step failed (" + r.message + ")";
            sol.y = y;
            sol.rho = rho;
            sol.policy = extract_policy(mdp, rho);
            sol.rounds = round;
            return sol;
        }
        const prec_t ynew = r.objective;
        vec rhonew = sanitize_occupation(vec(r.primal.begin(), r.primal.begin() + poly.n_vars()));
        const prec_t gain = ynew - y;
        rho = std::move(rhonew);
        y = ynew;
        if (gain < 1e-7) {
            converged = true;
            ++round;
            break;
        }
    }
    sol.y = y;
    sol.rho = rho;
    sol.policy = extract_policy(mdp, rho);
    sol.rounds = round;
    if (converged) {
        sol.status = SolveStatus::optimal;
        sol.certified = false;
        sol.message = "alternating search converged; feasible and locally stationary, "
                      "global optimality not certified";
    } else {
        sol.status = SolveStatus::node_limit;
        sol.certified = false;
        sol.message = "alternating search stalled: round limit reached";
    }
    return sol;
}

}  // namespace drccmdp
