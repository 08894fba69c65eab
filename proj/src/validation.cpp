#include "drccmdp/validation.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "drccmdp/rng.hpp"

namespace drccmdp {

std::string ambiguity_name(const AmbiguitySpec& spec) {
    struct Visitor {
        std::string operator()(const NominalSpec&) const { return "nominal"; }
        std::string operator()(const GaussianSpec&) const { return "gaussian"; }
        std::string operator()(const MomentAmbiguity& a) const {
            return to_string(a.kind) +
                   (a.support == SupportKind::nonnegative ? std::string("-nonneg") : std::string());
        }
        std::string operator()(const PhiAmbiguity& a) const { return to_string(a.divergence); }
        std::string operator()(const WassersteinAmbiguity& a) const {
            return a.support == SupportKind::full ? "w-full" : "w-nonneg";
        }
    };
    return std::visit(Visitor{}, spec);
}

prec_t monte_carlo_chance(const vec& rho, prec_t y, const vec& mu, const Matrix& sigma,
                          std::size_t n, std::uint64_t seed) {
    if (n < 1000) throw std::invalid_argument("monte_carlo_chance: need at least 1e3 samples");
    if (rho.size() != mu.size() || sigma.rows() != mu.size() || sigma.cols() != mu.size())
        throw std::invalid_argument("monte_carlo_chance: dimension mismatch");
    const prec_t m = dot(rho, mu);
    prec_t v = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        prec_t acc = 0.0;
        for (std::size_t j = 0; j < rho.size(); ++j) acc += sigma(i, j) * rho[j];
        v += rho[i] * acc;
    }
    const prec_t sd = std::sqrt(std::max<prec_t>(v, 0.0));

    const std::size_t nthreads = n >= 16384 ? 2 : 1;
    std::vector<std::size_t> hits(nthreads, 0);
    auto shard = [&](std::size_t t) {
        const CounterRng rng(seed, 7);
        std::size_t h = 0;
        for (std::size_t i = t; i < n; i += nthreads) {
            prec_t u = (rng.at(i) >> 11) * 0x1.0p-53;
            if (u <= 0.0) u = 0x1.0p-53;
            const prec_t draw = m + sd * normal_quantile(u);
            if (draw >= y) ++h;
        }
        hits[t] = h;
    };
    if (nthreads == 2) {
        std::thread worker([&] { shard(1); });
        shard(0);
        worker.join();
    } else {
        shard(0);
    }
    std::size_t total = 0;
    for (std::size_t h : hits) total += h;
    return static_cast<prec_t>(total) / static_cast<prec_t>(n);
}

prec_t cantelli_worst_case(const vec& rho, prec_t y, const vec& mu, const Matrix& sigma,
                           bool* mean_below) {
    if (rho.size() != mu.size() || sigma.rows() != mu.size() || sigma.cols() != mu.size())
        throw std::invalid_argument("cantelli_worst_case: dimension mismatch");
    if (mean_below) *mean_below = false;
    const prec_t m = dot(rho, mu);
    prec_t v = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        prec_t acc = 0.0;
        for (std::size_t j = 0; j < rho.size(); ++j) acc += sigma(i, j) * rho[j];
        v += rho[i] * acc;
    }
    if (m <= y) {
        if (mean_below) *mean_below = true;
        return 1.0;
    }
    const prec_t gapsq = (m - y) * (m - y);
    return v / (v + gapsq);
}

ValidationReport certify(const DrccmdpSolution& sol, const AmbiguitySpec& spec,
                         std::size_t n_samples, std::uint64_t seed, prec_t tol) {
    ValidationReport rep;
    rep.samples = n_samples;
    rep.seed = seed;
    if (sol.rho.empty()) {
        rep.supported = false;
        rep.note = "solution carries no occupation measure";
        return rep;
    }
    struct Visitor {
        const DrccmdpSolution& sol;
        ValidationReport& rep;
        std::size_t n_samples;
        std::uint64_t seed;
        prec_t tol;

        void operator()(const NominalSpec&) const {
            rep.supported = false;
            rep.oracle = "none";
            rep.note = "nominal LP has no chance constraint to certify";
        }
        void operator()(const GaussianSpec& g) const {
            rep.oracle = "normal-tail";
            const prec_t m = dot(sol.rho, g.mu);
            prec_t v = 0.0;
            for (std::size_t i = 0; i < sol.rho.size(); ++i) {
                prec_t acc = 0.0;
                for (std::size_t j = 0; j < sol.rho.size(); ++j) acc += g.sigma(i, j) * sol.rho[j];
                v += sol.rho[i] * acc;
            }
            const prec_t sd = std::sqrt(std::max<prec_t>(v, 0.0));
            const prec_t exact =
                sd > 0.0 ? 0.5 * std::erfc(-(sol.y - m) / sd / std::sqrt(2.0)) : (sol.y > m);
            rep.worst_case = exact;
            rep.empirical_violation =
                1.0 - monte_carlo_chance(sol.rho, sol.y, g.mu, g.sigma, n_samples, seed);
            rep.slack = g.epsilon - exact;
            rep.pass = exact <= g.epsilon + tol;
        }
        void operator()(const MomentAmbiguity& a) const {
            if (a.kind == MomentKind::d1 && a.support == SupportKind::full) {
                rep.oracle = "cantelli";
                bool degenerate = false;
                const prec_t wc = cantelli_worst_case(sol.rho, sol.y, a.mu, a.sigma, &degenerate);
                rep.worst_case = wc;
                rep.slack = a.epsilon - wc;
                rep.pass = !degenerate && wc <= a.epsilon + tol;
                if (degenerate) rep.note = "mean does not exceed y; worst case reported as 1";
            } else {
                rep.supported = false;
                rep.oracle = "none";
                rep.note = "no exact oracle for this moments set; Cantelli covers d1/full only";
            }
        }
        void operator()(const PhiAmbiguity& a) const {
            rep.oracle = "nominal-monte-carlo";
            const prec_t emp =
                1.0 - monte_carlo_chance(sol.rho, sol.y, a.mu_nu, a.sigma_nu, n_samples, seed);
            rep.empirical_violation = emp;
            // nominal-only check: the adjusted level f(theta, eps) must hold
            // under the nominal law, which is all the transform certifies
            const prec_t f = phi_risk_transform(a.divergence, a.theta, a.epsilon);
            rep.slack = (1.0 - f) - emp;
            const prec_t mc_band =
                3.0 * std::sqrt(0.25 / static_cast<prec_t>(n_samples));  // 3 sigma at worst p
            rep.pass = emp <= (1.0 - f) + mc_band + tol;
            rep.note = "nominal-distribution check only; no exact oracle over the divergence ball";
        }
        void operator()(const WassersteinAmbiguity& a) const {
            rep.oracle = "transport-breakpoints";
            const prec_t wc = wasserstein_worst_case_prob(sol.rho, sol.y, a);
            rep.worst_case = wc;
            rep.slack = a.epsilon - wc;
            rep.pass = wc <= a.epsilon + tol;
        }
    };
    std::visit(Visitor{sol, rep, n_samples, seed, tol}, spec);
    return rep;
}

}  // namespace drccmdp
