#include "drccmdp/phidiv.hpp"

#include <cmath>
#include <stdexcept>

namespace drccmdp {

std::string to_string(PhiDivergence d) {
    switch (d) {
    case PhiDivergence::kullback_leibler: return "kl";
    case PhiDivergence::variation: return "variation";
    case PhiDivergence::modified_chi2: return "mchi2";
    case PhiDivergence::hellinger: return "hellinger";
    }
    return "unknown";
}

void PhiAmbiguity::validate() const {
    if (!(theta > 0.0)) throw std::domain_error("phi ambiguity: theta must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("phi ambiguity: epsilon must lie in (0,1)");
    if (divergence == PhiDivergence::modified_chi2 && !(epsilon < 0.5))
        throw std::domain_error("phi ambiguity: modified chi2 requires epsilon < 1/2");
    if (divergence == PhiDivergence::hellinger && !(theta < 2.0 - std::sqrt(2.0)))
        throw std::domain_error("phi ambiguity: hellinger requires theta < 2 - sqrt(2)");
    if (mu_nu.size() != sigma_nu.rows() || sigma_nu.rows() != sigma_nu.cols())
        throw std::invalid_argument("phi ambiguity: nominal moment dimensions disagree");
}

prec_t normal_quantile(prec_t p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");
    // Acklam's rational approximation, then one Newton step on Phi(x) = p.
    static const prec_t a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const prec_t b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const prec_t c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const prec_t d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const prec_t plow = 0.02425, phigh = 1.0 - plow;
    prec_t x;
    if (p < plow) {
        const prec_t q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        const prec_t q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const prec_t q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const prec_t cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
        const prec_t pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        if (pdf > 1e-300) x -= (cdf - p) / pdf;
    }
    return x;
}

prec_t f_variation(prec_t theta, prec_t epsilon) {
    if (!(theta > 0.0) || !(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("f_variation: parameters outside domain");
    return 1.0 - epsilon + theta / 2.0;
}

prec_t f_modified_chi2(prec_t theta, prec_t epsilon) {
    if (!(theta > 0.0) || !(epsilon > 0.0 && epsilon < 0.5))
        throw std::domain_error("f_modified_chi2: requires theta > 0, epsilon in (0, 1/2)");
    const prec_t root = std::sqrt(theta * theta + 4.0 * theta * (epsilon - epsilon * epsilon));
    return 1.0 - epsilon + (root - (1.0 - 2.0 * epsilon) * theta) / (2.0 * theta + 2.0);
}

namespace {

prec_t kl_objective(prec_t x, prec_t theta, prec_t eps) {
    return (std::exp(-theta) * std::pow(x, 1.0 - eps) - 1.0) / (x - 1.0);
}

#ifndef NDEBUG
// the golden section below assumes a single interior valley; sweep once per
// process in debug builds
bool kl_unimodality_checked = false;
void kl_check_unimodal(prec_t theta, prec_t eps) {
    if (kl_unimodality_checked) return;
    kl_unimodality_checked = true;
    const int n = 1000;
    int descents = 0, valleys = 0;
    prec_t prev = kl_objective(1e-6, theta, eps);
    bool falling = false;
    for (int i = 1; i <= n; ++i) {
        const prec_t x = 1e-6 + (1.0 - 2e-6) * i / n;
        const prec_t v = kl_objective(x, theta, eps);
        if (v < prev - 1e-15) {
            if (!falling) ++descents;
            falling = true;
        } else if (v > prev + 1e-15) {
            if (falling) ++valleys;
            falling = false;
        }
        prev = v;
    }
    if (descents > 1 || valleys > 1)
        throw std::logic_error("f_kullback_leibler: objective not unimodal on (0,1)");
}
#endif

}  // namespace

prec_t f_kullback_leibler(prec_t theta, prec_t epsilon) {
    if (!(theta > 0.0) || !(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("f_kullback_leibler: parameters outside domain");
#ifndef NDEBUG
    kl_check_unimodal(theta, epsilon);
#endif
    prec_t lo = 1e-12, hi = 1.0 - 1e-12;
    const prec_t invphi = 0.6180339887498949;
    prec_t x1 = hi - invphi * (hi - lo);
    prec_t x2 = lo + invphi * (hi - lo);
    prec_t f1 = kl_objective(x1, theta, epsilon);
    prec_t f2 = kl_objective(x2, theta, epsilon);
    while (hi - lo > 1e-10) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = kl_objective(x1, theta, epsilon);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = kl_objective(x2, theta, epsilon);
        }
    }
    return kl_objective(0.5 * (lo + hi), theta, epsilon);
}

prec_t f_hellinger(prec_t theta, prec_t epsilon) {
    if (!(theta > 0.0 && theta < 2.0 - std::sqrt(2.0)) || !(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("f_hellinger: requires 0 < theta < 2 - sqrt(2), epsilon in (0,1)");
    const prec_t t2 = (2.0 - theta) * (2.0 - theta);
    const prec_t bb = -(2.0 - t2) * epsilon - t2 / 2.0;
    const prec_t delta = t2 * (4.0 - t2) * epsilon * (1.0 - epsilon);
    const prec_t root = (-bb + std::sqrt(delta)) / 2.0;
    // the quadratic came from squaring a one-sided equation; the root is the
    // adjusted level only while the unsquared side stays nonpositive. Past
    // that point no confidence level below one works, which the callers
    // treat as infeasibility (f >= 1).
    const prec_t c = t2 / 4.0;
    const prec_t side = (1.0 - 2.0 * c) * root + c - epsilon;
    if (side > 1e-12 || root > 1.0) return 1.0;
    return root;
}

prec_t phi_risk_transform(PhiDivergence d, prec_t theta, prec_t epsilon) {
    switch (d) {
    case PhiDivergence::kullback_leibler: return f_kullback_leibler(theta, epsilon);
    case PhiDivergence::variation: return f_variation(theta, epsilon);
    case PhiDivergence::modified_chi2: return f_modified_chi2(theta, epsilon);
    case PhiDivergence::hellinger: return f_hellinger(theta, epsilon);
    }
    throw std::logic_error("phi_risk_transform: unreachable");
}

ConeProgram build_mean_risk_socp(const OccupationPolytope& poly, const vec& mu,
                                 const Matrix& sigma, prec_t risk_coef) {
    const std::size_t nk = poly.n_vars();
    if (mu.size() != nk || sigma.rows() != nk || sigma.cols() != nk)
        throw std::invalid_argument("build_mean_risk_socp: dimension mismatch");
    if (risk_coef < 0.0)
        throw std::domain_error(
            "build_mean_risk_socp: negative risk coefficient is not cone-representable");
    Matrix chol = sigma;
    try {
        cholesky_inplace(chol);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("cholesky-failure: covariance not positive definite");
    }
    ConeProgram p;
    p.n_vars = nk + 1;  // rho, then y
    p.objective.assign(p.n_vars, 0.0);
    p.objective[nk] = 1.0;
    p.maximize = true;
    for (std::size_t r = 0; r < poly.n_rows(); ++r)
        p.add_eq_row({poly.eq_rows[r].begin(), poly.eq_rows[r].end()}, poly.eq_rhs[r]);
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> nn;
    for (std::size_t k = 0; k < nk; ++k) nn.emplace_back(k, k, -1.0);
    p.add_block(ConeKind::nonneg, nk, nn, vec(nk, 0.0));
    // (mu' rho - y, risk_coef * L' rho) in SOC
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> soc;
    for (std::size_t k = 0; k < nk; ++k)
        if (mu[k] != 0.0) soc.emplace_back(0, k, -mu[k]);
    soc.emplace_back(0, nk, 1.0);
    for (std::size_t i = 0; i < nk; ++i)
        for (std::size_t k = i; k < nk; ++k)  // row i of L' is column i of L
            if (chol(k, i) != 0.0) soc.emplace_back(1 + i, k, -risk_coef * chol(k, i));
    p.add_block(ConeKind::second_order, nk + 1, soc, vec(nk + 1, 0.0));
    return p;
}

ConeProgram build_phi_socp(const OccupationPolytope& poly, const PhiAmbiguity& a) {
    a.validate();
    const prec_t f = phi_risk_transform(a.divergence, a.theta, a.epsilon);
    if (f >= 1.0)
        throw std::domain_error("infeasible-transform: f(theta,epsilon) >= 1, quantile undefined");
    return build_mean_risk_socp(poly, a.mu_nu, a.sigma_nu, normal_quantile(f));
}

}  // namespace drccmdp
