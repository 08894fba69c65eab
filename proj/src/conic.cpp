#include "drccmdp/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace drccmdp {

std::string to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical-failure";
    case SolveStatus::node_limit: return "node-limit";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// svec helpers: lower triangle, column major, off-diagonals scaled by sqrt(2)
// ---------------------------------------------------------------------------

namespace {
constexpr prec_t kSqrt2 = 1.4142135623730951;
}

std::size_t svec_dim(std::size_t side) { return side * (side + 1) / 2; }

std::size_t svec_index(std::size_t side, std::size_t row, std::size_t col) {
    if (col > row) std::swap(row, col);
    return col * side - col * (col + 1) / 2 + row;
}

prec_t svec_scale(std::size_t row, std::size_t col) { return row == col ? 1.0 : kSqrt2; }

void svec_to_mat(const prec_t* sv, Matrix& out, std::size_t side) {
    if (out.rows() != side || out.cols() != side) out = Matrix(side, side);
    std::size_t k = 0;
    for (std::size_t c = 0; c < side; ++c)
        for (std::size_t r = c; r < side; ++r, ++k) {
            const prec_t v = (r == c) ? sv[k] : sv[k] / kSqrt2;
            out(r, c) = v;
            out(c, r) = v;
        }
}

void mat_to_svec(const Matrix& m, prec_t* sv) {
    const std::size_t side = m.rows();
    std::size_t k = 0;
    for (std::size_t c = 0; c < side; ++c)
        for (std::size_t r = c; r < side; ++r, ++k)
            sv[k] = (r == c) ? m(r, c) : kSqrt2 * 0.5 * (m(r, c) + m(c, r));
}

// ---------------------------------------------------------------------------
// ConeProgram
// ---------------------------------------------------------------------------

std::size_t ConeProgram::add_block(
    ConeKind kind, std::size_t dim,
    const std::vector<std::tuple<std::size_t, std::size_t, prec_t>>& entries, const vec& rhs,
    std::size_t psd_side) {
    if (rhs.size() != dim) throw std::invalid_argument("add_block: rhs size mismatch");
    if (kind == ConeKind::second_order && dim < 2)
        throw std::invalid_argument("add_block: second-order blocks need dimension >= 2");
    if (kind == ConeKind::psd) {
        if (psd_side == 0 || svec_dim(psd_side) != dim)
            throw std::invalid_argument("add_block: psd dim must be side*(side+1)/2");
    } else if (psd_side != 0) {
        throw std::invalid_argument("add_block: psd_side only valid for psd blocks");
    }
    const std::size_t row0 = total_rows_;
    for (const auto& [r, v, coef] : entries) {
        if (r >= dim || v >= n_vars) throw std::invalid_argument("add_block: entry out of range");
        if (coef != 0.0) triplets_.emplace_back(row0 + r, v, coef);
    }
    b_.insert(b_.end(), rhs.begin(), rhs.end());
    blocks_.push_back(ConeBlock{kind, dim, psd_side});
    total_rows_ += dim;
    return blocks_.size() - 1;
}

void ConeProgram::add_eq_row(const std::vector<std::pair<std::size_t, prec_t>>& lhs, prec_t rhs) {
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> e;
    e.reserve(lhs.size());
    for (auto& [v, c] : lhs) e.emplace_back(0, v, c);
    add_block(ConeKind::zero, 1, e, {rhs});
}

void ConeProgram::add_le_row(const std::vector<std::pair<std::size_t, prec_t>>& lhs, prec_t rhs) {
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> e;
    e.reserve(lhs.size());
    for (auto& [v, c] : lhs) e.emplace_back(0, v, c);
    add_block(ConeKind::nonneg, 1, e, {rhs});
}

void ConeProgram::add_ge_row(const std::vector<std::pair<std::size_t, prec_t>>& lhs, prec_t rhs) {
    std::vector<std::tuple<std::size_t, std::size_t, prec_t>> e;
    e.reserve(lhs.size());
    for (auto& [v, c] : lhs) e.emplace_back(0, v, -c);
    add_block(ConeKind::nonneg, 1, e, {-rhs});
}

vec ConeProgram::slack(const vec& x) const {
    vec s = b_;
    for (const auto& [r, v, c] : triplets_) s[r] -= c * x[v];
    return s;
}

prec_t ConeProgram::cone_violation(const vec& x) const {
    const vec s = slack(x);
    prec_t worst = 0.0;
    std::size_t row = 0;
    for (const auto& blk : blocks_) {
        switch (blk.kind) {
        case ConeKind::zero:
            for (std::size_t i = 0; i < blk.dim; ++i)
                worst = std::max(worst, std::abs(s[row + i]));
            break;
        case ConeKind::nonneg:
            for (std::size_t i = 0; i < blk.dim; ++i) worst = std::max(worst, -s[row + i]);
            break;
        case ConeKind::second_order: {
            prec_t nrm = 0.0;
            for (std::size_t i = 1; i < blk.dim; ++i) nrm += s[row + i] * s[row + i];
            worst = std::max(worst, std::sqrt(nrm) - s[row]);
            break;
        }
        case ConeKind::psd: {
            Matrix m;
            svec_to_mat(s.data() + row, m, blk.psd_side);
            vec ev;
            Matrix evec;
            symmetric_eigen(std::move(m), ev, evec);
            worst = std::max(worst, -ev.front());
            break;
        }
        }
        row += blk.dim;
    }
    for (const auto& [v, val] : pinned) worst = std::max(worst, std::abs(x[v] - val));
    return worst;
}

std::string ConeProgram::to_json() const {
    nlohmann::json j;
    j["n_vars"] = n_vars;
    j["objective"] = objective;
    j["maximize"] = maximize;
    j["b"] = b_;
    nlohmann::json jb = nlohmann::json::array();
    for (const auto& blk : blocks_) {
        nlohmann::json e;
        switch (blk.kind) {
        case ConeKind::zero: e["kind"] = "zero"; break;
        case ConeKind::nonneg: e["kind"] = "nonneg"; break;
        case ConeKind::second_order: e["kind"] = "soc"; break;
        case ConeKind::psd: e["kind"] = "psd"; break;
        }
        e["dim"] = blk.dim;
        if (blk.kind == ConeKind::psd) e["side"] = blk.psd_side;
        jb.push_back(e);
    }
    j["blocks"] = jb;
    nlohmann::json rows = nlohmann::json::array(), cols = nlohmann::json::array(),
                   vals = nlohmann::json::array();
    for (const auto& [r, v, c] : triplets_) {
        rows.push_back(r);
        cols.push_back(v);
        vals.push_back(c);
    }
    j["a_rows"] = rows;
    j["a_cols"] = cols;
    j["a_vals"] = vals;
    j["binaries"] = binaries;
    nlohmann::json pin = nlohmann::json::array();
    for (const auto& [v, val] : pinned) pin.push_back({{"var", v}, {"value", val}});
    j["pinned"] = pin;
    return j.dump();
}

ConeProgram ConeProgram::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ConeProgram p;
    p.n_vars = j.at("n_vars").get<std::size_t>();
    p.objective = j.at("objective").get<vec>();
    p.maximize = j.at("maximize").get<bool>();
    p.b_ = j.at("b").get<vec>();
    std::size_t total = 0;
    for (const auto& e : j.at("blocks")) {
        ConeBlock blk;
        const std::string k = e.at("kind").get<std::string>();
        if (k == "zero") blk.kind = ConeKind::zero;
        else if (k == "nonneg") blk.kind = ConeKind::nonneg;
        else if (k == "soc") blk.kind = ConeKind::second_order;
        else if (k == "psd") blk.kind = ConeKind::psd;
        else throw std::invalid_argument("from_json: unknown cone kind " + k);
        blk.dim = e.at("dim").get<std::size_t>();
        if (blk.kind == ConeKind::psd) blk.psd_side = e.at("side").get<std::size_t>();
        p.blocks_.push_back(blk);
        total += blk.dim;
    }
    p.total_rows_ = total;
    const auto rows = j.at("a_rows").get<std::vector<std::size_t>>();
    const auto cols = j.at("a_cols").get<std::vector<std::size_t>>();
    const auto vals = j.at("a_vals").get<vec>();
    for (std::size_t i = 0; i < rows.size(); ++i)
        p.triplets_.emplace_back(rows[i], cols[i], vals[i]);
    p.binaries = j.at("binaries").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("pinned"))
        p.pinned.emplace_back(e.at("var").get<std::size_t>(), e.at("value").get<prec_t>());
    return p;
}

// ---------------------------------------------------------------------------
// Homogeneous self-dual interior-point solver
// ---------------------------------------------------------------------------

namespace {

struct Csr {
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> ptr, idx;
    vec val;

    void build(std::size_t r, std::size_t c,
               const std::vector<std::tuple<std::size_t, std::size_t, prec_t>>& trips) {
        rows = r;
        cols = c;
        ptr.assign(r + 1, 0);
        for (const auto& t : trips) ++ptr[std::get<0>(t) + 1];
        for (std::size_t i = 0; i < r; ++i) ptr[i + 1] += ptr[i];
        idx.resize(trips.size());
        val.resize(trips.size());
        std::vector<std::size_t> fill(ptr.begin(), ptr.end() - 1);
        for (const auto& [ri, ci, v] : trips) {
            idx[fill[ri]] = ci;
            val[fill[ri]] = v;
            ++fill[ri];
        }
    }
};

struct BlockRef {
    ConeKind kind;
    std::size_t dim, side, row0;
    std::size_t aux = 0;  // index into soc/psd scaling arrays
};

constexpr std::size_t kNpos = static_cast<std::size_t>(-1);

struct SocCache {
    std::vector<std::size_t> vars;
    std::vector<std::size_t> var_pos;
    Matrix gram0j;  // A^T A - 2 a0 a0^T over touched vars (a0 = first row)
};

struct PsdCache {
    std::vector<std::size_t> vars;
    Matrix cols;  // dim x vars.size(), svec columns
};

/// Immutable per-program data shared by every branch-and-bound node.
/// The stored system is Ruiz-equilibrated: a = R A D, b = R b_user / sig_b,
/// c = D c_user / sig_c, with R uniform inside soc/psd blocks so the cones
/// are preserved. Results map back via x_user = sig_b * D x, z_user =
/// sig_c * R z, objective_user = sig_b * sig_c * objective.
struct PreparedProgram {
    const ConeProgram* src = nullptr;
    std::size_t n = 0, m_base = 0, mzero_base = 0;
    prec_t nu = 0.0;
    vec c_min;  // min-sense, scaled
    vec b_base;
    Csr a;
    std::vector<BlockRef> blocks;
    std::vector<std::size_t> zero_rows;
    std::vector<SocCache> soc_cache;
    std::vector<PsdCache> psd_cache;
    vec row_scale, col_scale;
    prec_t sig_b = 1.0, sig_c = 1.0;
};

std::shared_ptr<const PreparedProgram> prepare_program(const ConeProgram& p) {
    auto prep = std::make_shared<PreparedProgram>();
    prep->src = &p;
    prep->n = p.n_vars;
    if (prep->n == 0) throw std::invalid_argument("solve: empty program");
    if (p.objective.size() != prep->n)
        throw std::invalid_argument("solve: objective size mismatch");
    prep->c_min = p.objective;
    if (p.maximize)
        for (auto& v : prep->c_min) v = -v;
    prep->b_base = p.rhs();
    prep->m_base = p.total_rows();

    // Ruiz equilibration over the block structure
    prep->row_scale.assign(prep->m_base, 1.0);
    prep->col_scale.assign(prep->n, 1.0);
    {
        std::vector<std::size_t> row_block(prep->m_base, 0);
        std::vector<char> block_uniform;
        std::size_t r0 = 0, bi = 0;
        for (const auto& blk : p.blocks()) {
            const bool uniform =
                blk.kind == ConeKind::second_order || blk.kind == ConeKind::psd;
            block_uniform.push_back(uniform);
            for (std::size_t i = 0; i < blk.dim; ++i) row_block[r0 + i] = bi;
            r0 += blk.dim;
            ++bi;
        }
        auto trips = p.triplets();
        vec rwork(prep->m_base), cwork(prep->n), bmax(p.blocks().size());
        for (int round = 0; round < 8; ++round) {
            std::fill(rwork.begin(), rwork.end(), 0.0);
            std::fill(cwork.begin(), cwork.end(), 0.0);
            std::fill(bmax.begin(), bmax.end(), 0.0);
            for (const auto& [r, v, coef] : trips) {
                const prec_t mag =
                    std::abs(coef) * prep->row_scale[r] * prep->col_scale[v];
                rwork[r] = std::max(rwork[r], mag);
                bmax[row_block[r]] = std::max(bmax[row_block[r]], mag);
                cwork[v] = std::max(cwork[v], mag);
            }
            for (std::size_t r = 0; r < prep->m_base; ++r) {
                const prec_t mag = block_uniform[row_block[r]] ? bmax[row_block[r]] : rwork[r];
                if (mag > 1e-300) prep->row_scale[r] /= std::sqrt(mag);
            }
            for (std::size_t v = 0; v < prep->n; ++v)
                if (cwork[v] > 1e-300) prep->col_scale[v] /= std::sqrt(cwork[v]);
        }
    }
    {
        auto trips = p.triplets();
        for (auto& [r, v, coef] : trips) coef *= prep->row_scale[r] * prep->col_scale[v];
        prep->a.build(prep->m_base, prep->n, trips);
    }
    for (std::size_t v = 0; v < prep->n; ++v) prep->c_min[v] *= prep->col_scale[v];
    for (std::size_t r = 0; r < prep->m_base; ++r) prep->b_base[r] *= prep->row_scale[r];
    prec_t binf = 0.0, cinf = 0.0;
    for (prec_t v : prep->b_base) binf = std::max(binf, std::abs(v));
    for (prec_t v : prep->c_min) cinf = std::max(cinf, std::abs(v));
    prep->sig_b = std::max<prec_t>(1.0, binf);
    prep->sig_c = std::max<prec_t>(1.0, cinf);
    for (auto& v : prep->b_base) v /= prep->sig_b;
    for (auto& v : prep->c_min) v /= prep->sig_c;

    std::size_t r0 = 0, isoc = 0, ipsd = 0;
    for (const auto& blk : p.blocks()) {
        BlockRef ref{blk.kind, blk.dim, blk.psd_side, r0, 0};
        switch (blk.kind) {
        case ConeKind::zero:
            prep->mzero_base += blk.dim;
            for (std::size_t i = 0; i < blk.dim; ++i) prep->zero_rows.push_back(r0 + i);
            break;
        case ConeKind::nonneg: prep->nu += static_cast<prec_t>(blk.dim); break;
        case ConeKind::second_order:
            prep->nu += 2.0;
            ref.aux = isoc++;
            break;
        case ConeKind::psd:
            prep->nu += static_cast<prec_t>(blk.psd_side);
            ref.aux = ipsd++;
            break;
        }
        prep->blocks.push_back(ref);
        r0 += blk.dim;
    }

    const Csr& a = prep->a;
    for (const auto& blk : prep->blocks) {
        if (blk.kind == ConeKind::second_order) {
            SocCache cache;
            cache.var_pos.assign(prep->n, kNpos);
            for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r)
                for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
                    if (cache.var_pos[a.idx[k]] == kNpos) {
                        cache.var_pos[a.idx[k]] = cache.vars.size();
                        cache.vars.push_back(a.idx[k]);
                    }
            const std::size_t t = cache.vars.size();
            cache.gram0j = Matrix(t, t);
            std::vector<std::pair<std::size_t, prec_t>> rowbuf;
            for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r) {
                rowbuf.clear();
                for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
                    rowbuf.emplace_back(cache.var_pos[a.idx[k]], a.val[k]);
                const prec_t sgn = (r == blk.row0) ? -1.0 : 1.0;  // A'A - 2 a0 a0'
                for (auto& [i, vi] : rowbuf)
                    for (auto& [j, vj] : rowbuf) cache.gram0j(i, j) += sgn * vi * vj;
            }
            prep->soc_cache.push_back(std::move(cache));
        } else if (blk.kind == ConeKind::psd) {
            PsdCache cache;
            std::vector<std::size_t> pos(prep->n, kNpos);
            for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r)
                for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
                    if (pos[a.idx[k]] == kNpos) {
                        pos[a.idx[k]] = cache.vars.size();
                        cache.vars.push_back(a.idx[k]);
                    }
            cache.cols = Matrix(blk.dim, cache.vars.size());
            for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r)
                for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
                    cache.cols(r - blk.row0, pos[a.idx[k]]) = a.val[k];
            prep->psd_cache.push_back(std::move(cache));
        }
    }
    return prep;
}

struct SocScaling {
    prec_t eta = 1.0;
    vec wbar, u;  // u = J wbar
    vec lam;
};

struct PsdScaling {
    Matrix t, tinv;
    Matrix r, rinv;
    vec lam;
    vec lam_eval;
    Matrix lam_evec;
};

prec_t soc_residual(const prec_t* v, std::size_t d) {
    prec_t n1 = 0.0;
    for (std::size_t i = 1; i < d; ++i) n1 += v[i] * v[i];
    return v[0] * v[0] - n1;
}

prec_t soc_max_step(const prec_t* v, const prec_t* dv, std::size_t d) {
    prec_t a = dv[0] * dv[0], b = 2.0 * v[0] * dv[0], c = v[0] * v[0];
    for (std::size_t i = 1; i < d; ++i) {
        a -= dv[i] * dv[i];
        b -= 2.0 * v[i] * dv[i];
        c -= v[i] * v[i];
    }
    prec_t best = std::numeric_limits<prec_t>::infinity();
    if (std::abs(a) < 1e-300) {
        if (b < 0.0) best = -c / b;
    } else {
        const prec_t disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
            const prec_t sq = std::sqrt(disc);
            for (prec_t root : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
                if (root > 1e-300 && root < best) best = root;
        }
    }
    if (dv[0] < 0.0) best = std::min(best, -v[0] / dv[0]);
    return best;
}

Matrix mat_mult(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    gemm_accum(a, b, c);
    return c;
}

Matrix lower_tri_inverse(const Matrix& l) {
    const std::size_t n = l.rows();
    Matrix inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        inv(j, j) = 1.0 / l(j, j);
        for (std::size_t i = j + 1; i < n; ++i) {
            prec_t s = 0.0;
            for (std::size_t k = j; k < i; ++k) s += l(i, k) * inv(k, j);
            inv(i, j) = -s / l(i, i);
        }
    }
    return inv;
}

class HsdSolver {
public:
    HsdSolver(std::shared_ptr<const PreparedProgram> prep,
              std::vector<std::pair<std::size_t, prec_t>> pinned, const SolverOptions& opts)
        : prep_(std::move(prep)), pinned_(std::move(pinned)), opts_(opts) {
        n_ = prep_->n;
        npin_ = pinned_.size();
        m_ = prep_->m_base + npin_;
        b_ = prep_->b_base;
        for (const auto& [v, val] : pinned_)
            b_.push_back(val / (prep_->sig_b * prep_->col_scale[v]));
        nkkt_ = n_ + prep_->mzero_base + npin_;
    }

    SolveResult run();

private:
    std::shared_ptr<const PreparedProgram> prep_;
    std::vector<std::pair<std::size_t, prec_t>> pinned_;
    SolverOptions opts_;
    std::size_t n_ = 0, m_ = 0, npin_ = 0, nkkt_ = 0;
    vec b_;

    vec x_, s_, z_;
    prec_t tau_ = 1.0, kappa_ = 1.0;

    vec w_nonneg_;
    std::vector<SocScaling> soc_;
    std::vector<PsdScaling> psd_;
    vec lambda_;

    Matrix kkt_unreg_;
    LdltKkt fac_;

    // y += A x (all rows including pinned)
    void mat_vec_add(const vec& x, vec& y) const {
        const Csr& a = prep_->a;
        for (std::size_t r = 0; r < prep_->m_base; ++r) {
            prec_t acc = 0.0;
            for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k) acc += a.val[k] * x[a.idx[k]];
            y[r] += acc;
        }
        for (std::size_t e = 0; e < npin_; ++e) y[prep_->m_base + e] += x[pinned_[e].first];
    }
    // y += A^T w
    void mat_tvec_add(const vec& w, vec& y) const {
        const Csr& a = prep_->a;
        for (std::size_t r = 0; r < prep_->m_base; ++r) {
            const prec_t wr = w[r];
            if (wr == 0.0) continue;
            for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k) y[a.idx[k]] += wr * a.val[k];
        }
        for (std::size_t e = 0; e < npin_; ++e) y[pinned_[e].first] += w[prep_->m_base + e];
    }

    void compute_scalings();
    void assemble_kkt();
    void kkt_solve(vec& rhs) const;
    void solve_reduced(const vec& bx, const vec& bz, vec& dx, vec& dz) const;
    void apply_m_inv(const BlockRef& blk, const prec_t* in, prec_t* out) const;
    void apply_w(const BlockRef& blk, const prec_t* in, prec_t* out) const;
    void apply_wt(const BlockRef& blk, const prec_t* in, prec_t* out) const;
    void apply_w_invt(const BlockRef& blk, const prec_t* in, prec_t* out) const;
    void jordan_prod(const BlockRef& blk, const prec_t* x, const prec_t* y, prec_t* out) const;
    void lambda_solve(const BlockRef& blk, const prec_t* d, prec_t* out) const;
    prec_t max_step(const vec& v, const vec& dv) const;
    void cone_identity(vec& e) const;
};

void HsdSolver::cone_identity(vec& e) const {
    e.assign(m_, 0.0);
    for (const auto& blk : prep_->blocks) {
        switch (blk.kind) {
        case ConeKind::zero: break;
        case ConeKind::nonneg:
            for (std::size_t i = 0; i < blk.dim; ++i) e[blk.row0 + i] = 1.0;
            break;
        case ConeKind::second_order: e[blk.row0] = 1.0; break;
        case ConeKind::psd:
            for (std::size_t d = 0; d < blk.side; ++d)
                e[blk.row0 + svec_index(blk.side, d, d)] = 1.0;
            break;
        }
    }
}

void HsdSolver::compute_scalings() {
    w_nonneg_.assign(m_, 0.0);
    soc_.clear();
    psd_.clear();
    lambda_.assign(m_, 0.0);
    for (const auto& blk : prep_->blocks) {
        const std::size_t r0 = blk.row0;
        switch (blk.kind) {
        case ConeKind::zero: break;
        case ConeKind::nonneg:
            for (std::size_t i = 0; i < blk.dim; ++i) {
                w_nonneg_[r0 + i] = std::sqrt(s_[r0 + i] / z_[r0 + i]);
                lambda_[r0 + i] = std::sqrt(s_[r0 + i] * z_[r0 + i]);
            }
            break;
        case ConeKind::second_order: {
            SocScaling sc;
            const std::size_t d = blk.dim;
            const prec_t rs = std::sqrt(std::max<prec_t>(soc_residual(&s_[r0], d), 1e-300));
            const prec_t rz = std::sqrt(std::max<prec_t>(soc_residual(&z_[r0], d), 1e-300));
            sc.eta = std::sqrt(rs / rz);
            vec sbar(d), zbar(d);
            for (std::size_t i = 0; i < d; ++i) {
                sbar[i] = s_[r0 + i] / rs;
                zbar[i] = z_[r0 + i] / rz;
            }
            prec_t dotsz = 0.0;
            for (std::size_t i = 0; i < d; ++i) dotsz += sbar[i] * zbar[i];
            const prec_t gamma = std::sqrt((1.0 + dotsz) / 2.0);
            sc.wbar.assign(d, 0.0);
            sc.wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for (std::size_t i = 1; i < d; ++i) sc.wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
            sc.u = sc.wbar;
            for (std::size_t i = 1; i < d; ++i) sc.u[i] = -sc.u[i];
            // lambda = W z with W = eta [a b'; b I + bb'/(1+a)]
            sc.lam.assign(d, 0.0);
            prec_t bz1 = 0.0;
            for (std::size_t i = 1; i < d; ++i) bz1 += sc.wbar[i] * z_[r0 + i];
            sc.lam[0] = sc.eta * (sc.wbar[0] * z_[r0] + bz1);
            const prec_t coef = z_[r0] + bz1 / (1.0 + sc.wbar[0]);
            for (std::size_t i = 1; i < d; ++i)
                sc.lam[i] = sc.eta * (z_[r0 + i] + coef * sc.wbar[i]);
            for (std::size_t i = 0; i < d; ++i) lambda_[r0 + i] = sc.lam[i];
            soc_.push_back(std::move(sc));
            break;
        }
        case ConeKind::psd: {
            PsdScaling sc;
            const std::size_t ps = blk.side;
            Matrix smat, zmat;
            svec_to_mat(&s_[r0], smat, ps);
            svec_to_mat(&z_[r0], zmat, ps);
            vec es;
            Matrix vs;
            symmetric_eigen(smat, es, vs);
            Matrix shalf(ps, ps), shalf_inv(ps, ps);
            for (std::size_t i = 0; i < ps; ++i) {
                const prec_t ev = std::max<prec_t>(es[i], 1e-300);
                const prec_t root = std::sqrt(ev);
                for (std::size_t r = 0; r < ps; ++r) {
                    const prec_t vri = vs(r, i);
                    for (std::size_t cidx = 0; cidx < ps; ++cidx) {
                        shalf(r, cidx) += vri * root * vs(cidx, i);
                        shalf_inv(r, cidx) += vri / root * vs(cidx, i);
                    }
                }
            }
            Matrix bmid = mat_mult(mat_mult(shalf, zmat), shalf);
            vec eb;
            Matrix vb;
            symmetric_eigen(std::move(bmid), eb, vb);
            Matrix bnhalf(ps, ps), bphalf(ps, ps);
            for (std::size_t i = 0; i < ps; ++i) {
                const prec_t ev = std::max<prec_t>(eb[i], 1e-300);
                const prec_t root = std::sqrt(ev);
                for (std::size_t r = 0; r < ps; ++r) {
                    const prec_t vri = vb(r, i);
                    for (std::size_t cidx = 0; cidx < ps; ++cidx) {
                        bnhalf(r, cidx) += vri / root * vb(cidx, i);
                        bphalf(r, cidx) += vri * root * vb(cidx, i);
                    }
                }
            }
            sc.t = mat_mult(mat_mult(shalf, bnhalf), shalf);
            sc.tinv = mat_mult(mat_mult(shalf_inv, bphalf), shalf_inv);
            Matrix tcopy = sc.t;
            cholesky_inplace(tcopy, 1e-30);
            sc.r = std::move(tcopy);
            sc.rinv = lower_tri_inverse(sc.r);
            Matrix rt = sc.r.transposed();
            Matrix lam_mat = mat_mult(mat_mult(rt, zmat), sc.r);
            sc.lam.resize(blk.dim);
            mat_to_svec(lam_mat, sc.lam.data());
            symmetric_eigen(std::move(lam_mat), sc.lam_eval, sc.lam_evec);
            for (std::size_t i = 0; i < blk.dim; ++i) lambda_[r0 + i] = sc.lam[i];
            psd_.push_back(std::move(sc));
            break;
        }
        }
    }
}

void HsdSolver::apply_w(const BlockRef& blk, const prec_t* in, prec_t* out) const {
    switch (blk.kind) {
    case ConeKind::zero: break;
    case ConeKind::nonneg:
        for (std::size_t i = 0; i < blk.dim; ++i) out[i] = w_nonneg_[blk.row0 + i] * in[i];
        break;
    case ConeKind::second_order: {
        const SocScaling& sc = soc_[blk.aux];
        prec_t bv = 0.0;
        for (std::size_t i = 1; i < blk.dim; ++i) bv += sc.wbar[i] * in[i];
        out[0] = sc.eta * (sc.wbar[0] * in[0] + bv);
        const prec_t coef = in[0] + bv / (1.0 + sc.wbar[0]);
        for (std::size_t i = 1; i < blk.dim; ++i)
            out[i] = sc.eta * (in[i] + coef * sc.wbar[i]);
        break;
    }
    case ConeKind::psd: {
        const PsdScaling& sc = psd_[blk.aux];
        Matrix zin;
        svec_to_mat(in, zin, blk.side);
        Matrix res = mat_mult(mat_mult(sc.r.transposed(), zin), sc.r);
        mat_to_svec(res, out);
        break;
    }
    }
}

void HsdSolver::apply_wt(const BlockRef& blk, const prec_t* in, prec_t* out) const {
    if (blk.kind == ConeKind::psd) {
        const PsdScaling& sc = psd_[blk.aux];
        Matrix min_;
        svec_to_mat(in, min_, blk.side);
        Matrix res = mat_mult(mat_mult(sc.r, min_), sc.r.transposed());
        mat_to_svec(res, out);
    } else {
        apply_w(blk, in, out);  // symmetric scalings
    }
}

void HsdSolver::apply_w_invt(const BlockRef& blk, const prec_t* in, prec_t* out) const {
    switch (blk.kind) {
    case ConeKind::zero: break;
    case ConeKind::nonneg:
        for (std::size_t i = 0; i < blk.dim; ++i) out[i] = in[i] / w_nonneg_[blk.row0 + i];
        break;
    case ConeKind::second_order: {
        // W^{-1} = eta^{-1} [a b'; b I + bb'/(1+a)] evaluated at u = J wbar
        const SocScaling& sc = soc_[blk.aux];
        prec_t bv = 0.0;
        for (std::size_t i = 1; i < blk.dim; ++i) bv += sc.u[i] * in[i];
        out[0] = (sc.u[0] * in[0] + bv) / sc.eta;
        const prec_t coef = in[0] + bv / (1.0 + sc.u[0]);
        for (std::size_t i = 1; i < blk.dim; ++i)
            out[i] = (in[i] + coef * sc.u[i]) / sc.eta;
        break;
    }
    case ConeKind::psd: {
        const PsdScaling& sc = psd_[blk.aux];
        Matrix sin_;
        svec_to_mat(in, sin_, blk.side);
        Matrix res = mat_mult(mat_mult(sc.rinv, sin_), sc.rinv.transposed());
        mat_to_svec(res, out);
        break;
    }
    }
}

void HsdSolver::apply_m_inv(const BlockRef& blk, const prec_t* in, prec_t* out) const {
    switch (blk.kind) {
    case ConeKind::zero: break;
    case ConeKind::nonneg:
        for (std::size_t i = 0; i < blk.dim; ++i) {
            const prec_t w2 = w_nonneg_[blk.row0 + i] * w_nonneg_[blk.row0 + i];
            out[i] = in[i] / w2;
        }
        break;
    case ConeKind::second_order: {
        // M^{-1} = W^{-2} = eta^{-2} (2 u u' - J), u = J wbar
        const SocScaling& sc = soc_[blk.aux];
        const std::size_t d = blk.dim;
        prec_t uin = 0.0;
        for (std::size_t i = 0; i < d; ++i) uin += sc.u[i] * in[i];
        const prec_t ie2 = 1.0 / (sc.eta * sc.eta);
        out[0] = ie2 * (2.0 * sc.u[0] * uin - in[0]);
        for (std::size_t i = 1; i < d; ++i) out[i] = ie2 * (2.0 * sc.u[i] * uin + in[i]);
        break;
    }
    case ConeKind::psd: {
        const PsdScaling& sc = psd_[blk.aux];
        Matrix min_;
        svec_to_mat(in, min_, blk.side);
        Matrix res = mat_mult(mat_mult(sc.tinv, min_), sc.tinv);
        mat_to_svec(res, out);
        break;
    }
    }
}

void HsdSolver::jordan_prod(const BlockRef& blk, const prec_t* x, const prec_t* y,
                            prec_t* out) const {
    switch (blk.kind) {
    case ConeKind::zero: break;
    case ConeKind::nonneg:
        for (std::size_t i = 0; i < blk.dim; ++i) out[i] = x[i] * y[i];
        break;
    case ConeKind::second_order: {
        prec_t d0 = 0.0;
        for (std::size_t i = 0; i < blk.dim; ++i) d0 += x[i] * y[i];
        for (std::size_t i = 1; i < blk.dim; ++i) out[i] = x[0] * y[i] + y[0] * x[i];
        out[0] = d0;
        break;
    }
    case ConeKind::psd: {
        Matrix xm, ym;
        svec_to_mat(x, xm, blk.side);
        svec_to_mat(y, ym, blk.side);
        Matrix prod(blk.side, blk.side);
        gemm_accum(xm, ym, prod);
        Matrix sym(blk.side, blk.side);
        for (std::size_t i = 0; i < blk.side; ++i)
            for (std::size_t j = 0; j < blk.side; ++j)
                sym(i, j) = 0.5 * (prod(i, j) + prod(j, i));
        mat_to_svec(sym, out);
        break;
    }
    }
}

void HsdSolver::lambda_solve(const BlockRef& blk, const prec_t* d, prec_t* out) const {
    switch (blk.kind) {
    case ConeKind::zero: break;
    case ConeKind::nonneg:
        for (std::size_t i = 0; i < blk.dim; ++i) out[i] = d[i] / lambda_[blk.row0 + i];
        break;
    case ConeKind::second_order: {
        const SocScaling& sc = soc_[blk.aux];
        const std::size_t dd = blk.dim;
        prec_t l0 = sc.lam[0], l1d = 0.0, l1sq = 0.0;
        for (std::size_t i = 1; i < dd; ++i) {
            l1d += sc.lam[i] * d[i];
            l1sq += sc.lam[i] * sc.lam[i];
        }
        const prec_t det = l0 * l0 - l1sq;
        const prec_t u0 = (l0 * d[0] - l1d) / det;
        out[0] = u0;
        for (std::size_t i = 1; i < dd; ++i) out[i] = (d[i] - u0 * sc.lam[i]) / l0;
        break;
    }
    case ConeKind::psd: {
        const PsdScaling& sc = psd_[blk.aux];
        const std::size_t ps = blk.side;
        Matrix dm;
        svec_to_mat(d, dm, ps);
        Matrix vt = sc.lam_evec.transposed();
        Matrix dt = mat_mult(mat_mult(vt, dm), sc.lam_evec);
        for (std::size_t i = 0; i < ps; ++i)
            for (std::size_t j = 0; j < ps; ++j)
                dt(i, j) = 2.0 * dt(i, j) / (sc.lam_eval[i] + sc.lam_eval[j]);
        Matrix res = mat_mult(mat_mult(sc.lam_evec, dt), vt);
        mat_to_svec(res, out);
        break;
    }
    }
}

prec_t HsdSolver::max_step(const vec& v, const vec& dv) const {
    prec_t best = std::numeric_limits<prec_t>::infinity();
    for (const auto& blk : prep_->blocks) {
        const std::size_t r0 = blk.row0;
        switch (blk.kind) {
        case ConeKind::zero: break;
        case ConeKind::nonneg:
            for (std::size_t i = 0; i < blk.dim; ++i)
                if (dv[r0 + i] < 0.0) best = std::min(best, -v[r0 + i] / dv[r0 + i]);
            break;
        case ConeKind::second_order:
            best = std::min(best, soc_max_step(&v[r0], &dv[r0], blk.dim));
            break;
        case ConeKind::psd: {
            Matrix vm, dm;
            svec_to_mat(&v[r0], vm, blk.side);
            svec_to_mat(&dv[r0], dm, blk.side);
            Matrix l = vm;
            try {
                cholesky_inplace(l, 1e-28);
            } catch (const std::runtime_error&) {
                return 0.0;
            }
            Matrix linv = lower_tri_inverse(l);
            Matrix mid = mat_mult(mat_mult(linv, dm), linv.transposed());
            vec ev;
            Matrix evv;
            symmetric_eigen(std::move(mid), ev, evv);
            if (ev.front() < 0.0) best = std::min(best, -1.0 / ev.front());
            break;
        }
        }
    }
    return best;
}

void HsdSolver::assemble_kkt() {
    if (kkt_unreg_.rows() != nkkt_) kkt_unreg_ = Matrix(nkkt_, nkkt_);
    kkt_unreg_.set_zero();
    Matrix& h = kkt_unreg_;
    const Csr& a = prep_->a;
    for (const auto& blk : prep_->blocks) {
        switch (blk.kind) {
        case ConeKind::zero: break;
        case ConeKind::nonneg: {
            for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r) {
                const prec_t wi = 1.0 / (w_nonneg_[r] * w_nonneg_[r]);
                for (std::size_t k1 = a.ptr[r]; k1 < a.ptr[r + 1]; ++k1) {
                    const std::size_t i = a.idx[k1];
                    const prec_t vi = wi * a.val[k1];
                    prec_t* hrow = h.row(i);
                    for (std::size_t k2 = a.ptr[r]; k2 < a.ptr[r + 1]; ++k2)
                        hrow[a.idx[k2]] += vi * a.val[k2];
                }
            }
            break;
        }
        case ConeKind::second_order: {
            // A' M^{-1} A = eta^{-2} (A'A - 2 a0 a0' + 2 (A'u)(A'u)')
            const SocCache& cache = prep_->soc_cache[blk.aux];
            const SocScaling& sc = soc_[blk.aux];
            const std::size_t t = cache.vars.size();
            vec p1(t, 0.0);
            for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r) {
                const prec_t ui = sc.u[r - blk.row0];
                for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
                    p1[cache.var_pos[a.idx[k]]] += ui * a.val[k];
            }
            const prec_t ie2 = 1.0 / (sc.eta * sc.eta);
            for (std::size_t ii = 0; ii < t; ++ii) {
                const prec_t p1i = p1[ii];
                const prec_t* g0 = cache.gram0j.row(ii);
                prec_t* hrow = h.row(cache.vars[ii]);
                for (std::size_t jj = 0; jj < t; ++jj)
                    hrow[cache.vars[jj]] += ie2 * (g0[jj] + 2.0 * p1i * p1[jj]);
            }
            break;
        }
        case ConeKind::psd: {
            const PsdCache& cache = prep_->psd_cache[blk.aux];
            const PsdScaling& sc = psd_[blk.aux];
            const std::size_t t = cache.vars.size();
            Matrix scaled(blk.dim, t);
            Matrix colmat, tmp;
            vec svbuf(blk.dim);
            for (std::size_t j = 0; j < t; ++j) {
                for (std::size_t r = 0; r < blk.dim; ++r) svbuf[r] = cache.cols(r, j);
                svec_to_mat(svbuf.data(), colmat, blk.side);
                tmp = mat_mult(mat_mult(sc.tinv, colmat), sc.tinv);
                mat_to_svec(tmp, svbuf.data());
                for (std::size_t r = 0; r < blk.dim; ++r) scaled(r, j) = svbuf[r];
            }
            for (std::size_t ii = 0; ii < t; ++ii) {
                prec_t* hrow = h.row(cache.vars[ii]);
                for (std::size_t jj = 0; jj < t; ++jj) {
                    prec_t acc = 0.0;
                    for (std::size_t r = 0; r < blk.dim; ++r)
                        acc += cache.cols(r, ii) * scaled(r, jj);
                    hrow[cache.vars[jj]] += acc;
                }
            }
            break;
        }
        }
    }
    for (std::size_t e = 0; e < prep_->zero_rows.size(); ++e) {
        const std::size_t r = prep_->zero_rows[e];
        for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k) {
            h(n_ + e, a.idx[k]) = a.val[k];
            h(a.idx[k], n_ + e) = a.val[k];
        }
    }
    const std::size_t eq0 = prep_->zero_rows.size();
    for (std::size_t e = 0; e < npin_; ++e) {
        h(n_ + eq0 + e, pinned_[e].first) = 1.0;
        h(pinned_[e].first, n_ + eq0 + e) = 1.0;
    }
    Matrix kkt = kkt_unreg_;
    prec_t maxdiag = 1.0;
    for (std::size_t i = 0; i < n_; ++i) maxdiag = std::max(maxdiag, kkt(i, i));
    const prec_t reg_h = 1e-11 * maxdiag;
    for (std::size_t i = 0; i < n_; ++i) kkt(i, i) += reg_h;
    for (std::size_t i = n_; i < nkkt_; ++i) kkt(i, i) -= 1e-9;
    std::vector<int> sign(nkkt_, 1);
    for (std::size_t i = n_; i < nkkt_; ++i) sign[i] = -1;
    fac_.factor(std::move(kkt), sign, 0.0);
}

void HsdSolver::kkt_solve(vec& rhs) const {
    vec x = rhs;
    fac_.solve(x);
    // iterative refinement with extended-precision residuals; this also
    // removes the static regularization that stabilized the factorization
    vec r(nkkt_), d(nkkt_);
    for (int round = 0; round < 3; ++round) {
        for (std::size_t i = 0; i < nkkt_; ++i) {
            long double acc = 0.0L;
            const prec_t* row = kkt_unreg_.row(i);
            for (std::size_t j = 0; j < nkkt_; ++j)
                acc += static_cast<long double>(row[j]) * static_cast<long double>(x[j]);
            r[i] = static_cast<prec_t>(static_cast<long double>(rhs[i]) - acc);
        }
        d = r;
        fac_.solve(d);
        for (std::size_t i = 0; i < nkkt_; ++i) x[i] += d[i];
    }
    rhs = x;
}

void HsdSolver::solve_reduced(const vec& bx, const vec& bz, vec& dx, vec& dz) const {
    vec rhs(nkkt_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) rhs[i] = bx[i];
    vec tmp(m_, 0.0);
    const Csr& a = prep_->a;
    for (const auto& blk : prep_->blocks) {
        if (blk.kind == ConeKind::zero) continue;
        apply_m_inv(blk, &bz[blk.row0], &tmp[blk.row0]);
        for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r) {
            const prec_t wr = tmp[r];
            if (wr == 0.0) continue;
            for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
                rhs[a.idx[k]] += wr * a.val[k];
        }
    }
    for (std::size_t e = 0; e < prep_->zero_rows.size(); ++e)
        rhs[n_ + e] = bz[prep_->zero_rows[e]];
    for (std::size_t e = 0; e < npin_; ++e)
        rhs[n_ + prep_->zero_rows.size() + e] = bz[prep_->m_base + e];
    kkt_solve(rhs);
    dx.assign(rhs.begin(), rhs.begin() + n_);
    dz.assign(m_, 0.0);
    for (std::size_t e = 0; e < prep_->zero_rows.size(); ++e)
        dz[prep_->zero_rows[e]] = rhs[n_ + e];
    for (std::size_t e = 0; e < npin_; ++e) dz[prep_->m_base + e] = rhs[n_ + prep_->zero_rows.size() + e];
    vec adx(m_, 0.0);
    for (const auto& blk : prep_->blocks) {
        if (blk.kind == ConeKind::zero) continue;
        for (std::size_t r = blk.row0; r < blk.row0 + blk.dim; ++r) {
            prec_t acc = 0.0;
            for (std::size_t k = a.ptr[r]; k < a.ptr[r + 1]; ++k) acc += a.val[k] * dx[a.idx[k]];
            adx[r] = acc - bz[r];
        }
        apply_m_inv(blk, &adx[blk.row0], &dz[blk.row0]);
    }
}

SolveResult HsdSolver::run() {
    const auto t_start = std::chrono::steady_clock::now();
    SolveResult res;
    res.primal.assign(n_, 0.0);

    x_.assign(n_, 0.0);
    cone_identity(s_);
    z_ = s_;
    tau_ = 1.0;
    kappa_ = 1.0;

    const vec& c_ = prep_->c_min;
    const prec_t bnorm = std::max<prec_t>(1.0, norm2(b_));
    const prec_t cnorm = std::max<prec_t>(1.0, norm2(c_));
    prec_t mu0 = 0.0;

    vec rx(n_), rz(m_), ds(m_), bx(n_), bz(m_);
    vec x1, z1, x2, z2, dxa(n_), dza(m_), dsa(m_), dx(n_), dz(m_), dsv(m_);
    vec wdz(m_, 0.0), wids(m_, 0.0), comp(m_, 0.0), econe;
    cone_identity(econe);

    // maps a scaled iterate back into the user's coordinates
    auto report_point = [&](const vec& xs, const vec& zs, prec_t tau, prec_t pcost, prec_t dcost) {
        for (std::size_t i = 0; i < n_; ++i)
            res.primal[i] = prep_->sig_b * prep_->col_scale[i] * xs[i] / tau;
        res.dual.assign(prep_->m_base, 0.0);
        for (std::size_t r = 0; r < prep_->m_base; ++r)
            res.dual[r] = prep_->sig_c * prep_->row_scale[r] * zs[r] / tau;
        const prec_t scale = prep_->sig_b * prep_->sig_c;
        res.objective = prep_->src->maximize ? -scale * pcost : scale * pcost;
        res.dual_objective = prep_->src->maximize ? -scale * dcost : scale * dcost;
    };

    // best iterate seen, by worst residual; returned when progress stalls
    prec_t best_metric = std::numeric_limits<prec_t>::infinity();
    prec_t best_pres = 0, best_dres = 0, best_relgap = 0, best_pcost = 0, best_dcost = 0;
    vec best_x, best_z;
    prec_t best_tau = 1.0;
    std::size_t no_progress = 0;

    std::size_t iter = 0;
    bool done = false;
    for (; iter < opts_.max_iterations && !done; ++iter) {
        for (std::size_t i = 0; i < n_; ++i) rx[i] = c_[i] * tau_;
        mat_tvec_add(z_, rx);
        std::fill(rz.begin(), rz.end(), 0.0);
        mat_vec_add(x_, rz);
        for (std::size_t r = 0; r < m_; ++r) rz[r] += s_[r] - b_[r] * tau_;
        const prec_t ctx = dot(c_, x_);
        const prec_t btz = dot(b_, z_);
        const prec_t rtau = kappa_ + ctx + btz;

        prec_t szdot = 0.0;
        for (std::size_t r = 0; r < m_; ++r) szdot += s_[r] * z_[r];
        const prec_t mu = (szdot + tau_ * kappa_) / (prep_->nu + 1.0);
        if (iter == 0) mu0 = mu;

        const prec_t pcost = ctx / tau_;
        const prec_t dcost = -btz / tau_;
        const prec_t gap = szdot / (tau_ * tau_);
        const prec_t relgap = gap / std::max<prec_t>({1.0, std::abs(pcost), std::abs(dcost)});
        const prec_t pres = norm2(rz) / (tau_ * bnorm);
        const prec_t dres = norm2(rx) / (tau_ * cnorm);
        if (opts_.verbose)
            std::fprintf(stderr,
                         "it %2zu mu=%9.2e pres=%9.2e dres=%9.2e relgap=%9.2e tau=%8.2e kap=%8.2e\n",
                         iter, mu, pres, dres, relgap, tau_, kappa_);
        const prec_t metric = std::max({pres, dres / 100.0, relgap});
        if (metric < best_metric) {
            best_metric = metric;
            best_pres = pres;
            best_dres = dres;
            best_relgap = relgap;
            best_pcost = pcost;
            best_dcost = dcost;
            best_x = x_;
            best_z = z_;
            best_tau = tau_;
            no_progress = 0;
        } else {
            ++no_progress;
        }
        // the dual residual bottoms out around 1e-7 on badly scaled data
        // (the dz recovery amplifies round-off by the cone scaling); primal
        // feasibility and the gap stay primary
        const prec_t dres_tol = std::max<prec_t>(opts_.feas_tol, 1e-6);
        if (pres <= opts_.feas_tol && dres <= dres_tol && relgap <= opts_.rel_gap_tol) {
            res.status = SolveStatus::optimal;
            report_point(x_, z_, tau_, pcost, dcost);
            if (dres > opts_.feas_tol) {
                std::ostringstream msg;
                msg << "dual residual " << dres;
                res.message = msg.str();
            }
            done = true;
            break;
        }
        if (btz < -1e-12) {
            vec atz(n_, 0.0);
            mat_tvec_add(z_, atz);
            if (norm2(atz) / (-btz) * bnorm <= 1e-8 * cnorm) {
                res.status = SolveStatus::infeasible;
                res.dual.assign(prep_->m_base, 0.0);
                for (std::size_t r = 0; r < prep_->m_base; ++r)
                    res.dual[r] = prep_->row_scale[r] * z_[r];
                const prec_t nrm = -dot(b_, z_);
                for (auto& v : res.dual) v /= nrm * prep_->sig_b;
                res.message = "primal infeasibility certificate found";
                done = true;
                break;
            }
        }
        if (ctx < -1e-12) {
            vec axs(m_, 0.0);
            mat_vec_add(x_, axs);
            for (std::size_t r = 0; r < m_; ++r) axs[r] += s_[r];
            if (norm2(axs) / (-ctx) * cnorm <= 1e-8 * bnorm) {
                res.status = SolveStatus::unbounded;
                res.primal.assign(n_, 0.0);
                for (std::size_t i = 0; i < n_; ++i)
                    res.primal[i] = prep_->col_scale[i] * x_[i] / (-ctx * prep_->sig_c);
                res.message = "dual infeasibility certificate found (objective ray)";
                done = true;
                break;
            }
        }
        if (mu < 1e-14 * mu0 || tau_ < 1e-12 * std::max<prec_t>(1.0, kappa_) || no_progress >= 6) {
            break;  // fall through to the best-iterate tiering below
        }

        try {
            compute_scalings();
            assemble_kkt();

        for (std::size_t i = 0; i < n_; ++i) bx[i] = -c_[i];
        solve_reduced(bx, b_, x1, z1);
        const prec_t d1 = dot(c_, x1) + dot(b_, z1) - kappa_ / tau_;

        // affine direction; ds = -lambda so W' ds = -s
        for (std::size_t i = 0; i < n_; ++i) bx[i] = -rx[i];
        for (std::size_t r = 0; r < m_; ++r) bz[r] = -rz[r];
        for (const auto& blk : prep_->blocks)
            if (blk.kind != ConeKind::zero)
                for (std::size_t i = blk.row0; i < blk.row0 + blk.dim; ++i) bz[i] += s_[i];
        solve_reduced(bx, bz, x2, z2);
        const prec_t dtau_a = (-rtau + kappa_ - (dot(c_, x2) + dot(b_, z2))) / d1;
        for (std::size_t i = 0; i < n_; ++i) dxa[i] = x2[i] + dtau_a * x1[i];
        for (std::size_t r = 0; r < m_; ++r) dza[r] = z2[r] + dtau_a * z1[r];
        std::fill(dsa.begin(), dsa.end(), 0.0);
        mat_vec_add(dxa, dsa);
        for (std::size_t r = 0; r < m_; ++r) dsa[r] = -rz[r] - dsa[r] + b_[r] * dtau_a;
        for (std::size_t e : prep_->zero_rows) dsa[e] = 0.0;
        for (std::size_t e = 0; e < npin_; ++e) dsa[prep_->m_base + e] = 0.0;
        const prec_t dkappa_a = -kappa_ - kappa_ * dtau_a / tau_;

        prec_t alpha_a = std::min(max_step(s_, dsa), max_step(z_, dza));
        if (dtau_a < 0.0) alpha_a = std::min(alpha_a, -tau_ / dtau_a);
        if (dkappa_a < 0.0) alpha_a = std::min(alpha_a, -kappa_ / dkappa_a);
        alpha_a = std::min<prec_t>(alpha_a, 1.0);

        prec_t mu_aff = 0.0;
        for (std::size_t r = 0; r < m_; ++r)
            mu_aff += (s_[r] + alpha_a * dsa[r]) * (z_[r] + alpha_a * dza[r]);
        mu_aff += (tau_ + alpha_a * dtau_a) * (kappa_ + alpha_a * dkappa_a);
        mu_aff /= (prep_->nu + 1.0);
        prec_t sigma = std::pow(std::max<prec_t>(0.0, mu_aff / mu), 3);
        sigma = std::min<prec_t>(sigma, 1.0);

        // combined direction
        for (const auto& blk : prep_->blocks) {
            if (blk.kind == ConeKind::zero) continue;
            apply_w(blk, &dza[blk.row0], &wdz[blk.row0]);
            apply_w_invt(blk, &dsa[blk.row0], &wids[blk.row0]);
        }
        for (const auto& blk : prep_->blocks) {
            if (blk.kind == ConeKind::zero) continue;
            vec l2(blk.dim), cross(blk.dim);
            jordan_prod(blk, &lambda_[blk.row0], &lambda_[blk.row0], l2.data());
            jordan_prod(blk, &wids[blk.row0], &wdz[blk.row0], cross.data());
            for (std::size_t i = 0; i < blk.dim; ++i)
                comp[blk.row0 + i] = -l2[i] - cross[i] + sigma * mu * econe[blk.row0 + i];
            lambda_solve(blk, &comp[blk.row0], &ds[blk.row0]);
        }
        const prec_t oms = 1.0 - sigma;
        for (std::size_t i = 0; i < n_; ++i) bx[i] = -oms * rx[i];
        for (std::size_t r = 0; r < m_; ++r) bz[r] = -oms * rz[r];
        for (const auto& blk : prep_->blocks) {
            if (blk.kind == ConeKind::zero) continue;
            vec wtds(blk.dim);
            apply_wt(blk, &ds[blk.row0], wtds.data());
            for (std::size_t i = 0; i < blk.dim; ++i) bz[blk.row0 + i] -= wtds[i];
        }
        solve_reduced(bx, bz, x2, z2);
        const prec_t rhs_tk = -tau_ * kappa_ - dtau_a * dkappa_a + sigma * mu;
        const prec_t dtau =
            (-oms * rtau - rhs_tk / tau_ - (dot(c_, x2) + dot(b_, z2))) / d1;
        for (std::size_t i = 0; i < n_; ++i) dx[i] = x2[i] + dtau * x1[i];
        for (std::size_t r = 0; r < m_; ++r) dz[r] = z2[r] + dtau * z1[r];
        std::fill(dsv.begin(), dsv.end(), 0.0);
        mat_vec_add(dx, dsv);
        for (std::size_t r = 0; r < m_; ++r) dsv[r] = -oms * rz[r] - dsv[r] + b_[r] * dtau;
        for (std::size_t e : prep_->zero_rows) dsv[e] = 0.0;
        for (std::size_t e = 0; e < npin_; ++e) dsv[prep_->m_base + e] = 0.0;
        const prec_t dkappa = (rhs_tk - kappa_ * dtau) / tau_;

        prec_t alpha = std::min(max_step(s_, dsv), max_step(z_, dz));
        if (dtau < 0.0) alpha = std::min(alpha, -tau_ / dtau);
        if (dkappa < 0.0) alpha = std::min(alpha, -kappa_ / dkappa);
        alpha = std::min<prec_t>(0.99 * alpha, 1.0);
        if (!(alpha > 1e-10)) {
            res.status = SolveStatus::numerical_failure;
            res.message = "step size collapsed";
            break;
        }

        for (std::size_t i = 0; i < n_; ++i) x_[i] += alpha * dx[i];
        for (std::size_t r = 0; r < m_; ++r) {
            s_[r] += alpha * dsv[r];
            z_[r] += alpha * dz[r];
        }
        for (std::size_t e : prep_->zero_rows) s_[e] = 0.0;
        for (std::size_t e = 0; e < npin_; ++e) s_[prep_->m_base + e] = 0.0;
        tau_ += alpha * dtau;
        kappa_ += alpha * dkappa;
        } catch (const std::exception& e) {
            res.message = std::string("linear algebra breakdown: ") + e.what();
            break;  // best-iterate tiering below decides the status
        }
    }

    if (!done) {
        // accept the best iterate at a relaxed tier before giving up
        if (!best_x.empty() && best_pres <= 10.0 * opts_.feas_tol &&
            best_dres <= std::max<prec_t>(1e-4, 10.0 * opts_.feas_tol) &&
            best_relgap <= 100.0 * opts_.rel_gap_tol) {
            res.status = SolveStatus::optimal;
            report_point(best_x, best_z, best_tau, best_pcost, best_dcost);
            std::ostringstream msg;
            msg << "best iterate at reduced accuracy (pres " << best_pres << ", dres " << best_dres
                << ", relgap " << best_relgap << ")";
            res.message = msg.str();
        } else {
            res.status = SolveStatus::numerical_failure;
            if (res.message.empty())
                res.message = iter >= opts_.max_iterations ? "iteration limit reached"
                                                           : "progress stalled before tolerance";
        }
    }
    if (res.status == SolveStatus::optimal) {
        const prec_t viol = [&] {
            prec_t v = prep_->src->cone_violation(res.primal);
            for (const auto& [vi, val] : pinned_) v = std::max(v, std::abs(res.primal[vi] - val));
            return v;
        }();
        const prec_t scale = prep_->sig_b * prep_->sig_c;
        if (!(viol <= 1e-6 * std::max<prec_t>(1.0, scale))) {
            res.status = SolveStatus::numerical_failure;
            res.message = "converged point violates cone constraints by " + std::to_string(viol);
        }
    }
    res.iterations = iter;
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

SolveResult solve_prepared(const std::shared_ptr<const PreparedProgram>& prep,
                           std::vector<std::pair<std::size_t, prec_t>> pinned,
                           const SolverOptions& opts) {
    HsdSolver solver(prep, std::move(pinned), opts);
    return solver.run();
}

}  // namespace

SolveResult solve_continuous(const ConeProgram& p, const SolverOptions& opts) {
    auto prep = prepare_program(p);
    return solve_prepared(prep, p.pinned, opts);
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

namespace {

struct BnbNode {
    prec_t bound;
    std::size_t id;
    std::vector<std::pair<std::size_t, prec_t>> fixes;
};

struct NodeOrder {
    bool operator()(const BnbNode& a, const BnbNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;  // FIFO among equal bounds
    }
};

}  // namespace

SolveResult solve_misocp(const ConeProgram& p, const SolverOptions& opts,
                         const MisocpHeuristic& heuristic) {
    if (p.binaries.empty())
        throw std::invalid_argument("solve_misocp: program declares no binary variables");
    const auto t_start = std::chrono::steady_clock::now();
    const prec_t sense = p.maximize ? -1.0 : 1.0;
    auto prep = prepare_program(p);

    SolveResult best;
    bool have_incumbent = false;
    prec_t incumbent = std::numeric_limits<prec_t>::infinity();
    std::size_t nodes = 0;

    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };
    auto node_pins = [&](const std::vector<std::pair<std::size_t, prec_t>>& fixes) {
        auto pins = p.pinned;
        pins.insert(pins.end(), fixes.begin(), fixes.end());
        return pins;
    };
    auto try_assignment = [&](const std::vector<prec_t>& assign) {
        std::vector<std::pair<std::size_t, prec_t>> fixes;
        for (std::size_t i = 0; i < p.binaries.size(); ++i)
            fixes.emplace_back(p.binaries[i], assign[i]);
        SolveResult r = solve_prepared(prep, node_pins(fixes), opts);
        ++nodes;
        if (r.status == SolveStatus::optimal && sense * r.objective < incumbent - 1e-12) {
            incumbent = sense * r.objective;
            best = r;
            have_incumbent = true;
        }
    };

    std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;
    std::size_t next_id = 0;
    open.push(BnbNode{-std::numeric_limits<prec_t>::infinity(), next_id++, {}});
    prec_t global_bound = -std::numeric_limits<prec_t>::infinity();
    bool root_processed = false;
    bool limit_hit = false;

    while (!open.empty()) {
        if (nodes >= opts.node_limit ||
            (opts.time_limit_seconds > 0 && elapsed() > opts.time_limit_seconds)) {
            limit_hit = true;
            global_bound = open.top().bound;
            break;
        }
        BnbNode node = open.top();
        open.pop();
        global_bound = node.bound;
        const prec_t prune_slack = opts.mip_rel_gap * std::max<prec_t>(1.0, std::abs(incumbent));
        if (have_incumbent && node.bound >= incumbent - prune_slack) {
            global_bound = incumbent;
            break;
        }

        SolveResult relax = solve_prepared(prep, node_pins(node.fixes), opts);
        ++nodes;
        if (!root_processed) {
            root_processed = true;
            if (relax.status == SolveStatus::infeasible || relax.status == SolveStatus::unbounded) {
                relax.nodes = nodes;
                relax.wall_seconds = elapsed();
                return relax;
            }
        }
        if (relax.status == SolveStatus::infeasible) continue;
        if (relax.status != SolveStatus::optimal) {
            std::size_t pick = kNpos;
            for (std::size_t bvar : p.binaries) {
                bool fixed = false;
                for (auto& f : node.fixes) fixed |= (f.first == bvar);
                if (!fixed) {
                    pick = bvar;
                    break;
                }
            }
            if (pick == kNpos) continue;
            for (prec_t v : {0.0, 1.0}) {
                BnbNode child{node.bound, next_id++, node.fixes};
                child.fixes.emplace_back(pick, v);
                open.push(child);
            }
            continue;
        }
        const prec_t node_val = sense * relax.objective;
        if (have_incumbent && node_val >= incumbent - prune_slack) continue;

        std::size_t pick = kNpos;
        prec_t worst_frac = opts.integrality_tol;
        for (std::size_t bvar : p.binaries) {
            const prec_t v = relax.primal[bvar];
            const prec_t frac = std::abs(v - std::round(v));
            if (frac > worst_frac) {
                worst_frac = frac;
                pick = bvar;
            }
        }
        if (pick == kNpos) {
            if (node_val < incumbent - 1e-12) {
                incumbent = node_val;
                best = relax;
                have_incumbent = true;
            }
            continue;
        }
        if (heuristic) {
            for (const auto& assign : heuristic(p, relax.primal)) try_assignment(assign);
        } else if (node.fixes.empty()) {
            std::vector<prec_t> assign;
            assign.reserve(p.binaries.size());
            for (std::size_t bvar : p.binaries) assign.push_back(std::round(relax.primal[bvar]));
            try_assignment(assign);
        }
        for (prec_t v : {0.0, 1.0}) {
            BnbNode child{node_val, next_id++, node.fixes};
            child.fixes.emplace_back(pick, v);
            open.push(child);
        }
    }

    if (!have_incumbent) {
        SolveResult r;
        r.status = limit_hit ? SolveStatus::node_limit : SolveStatus::infeasible;
        r.certified = false;
        r.nodes = nodes;
        r.wall_seconds = elapsed();
        r.message = limit_hit ? "limit reached before an incumbent was found"
                              : "all branches infeasible";
        return r;
    }
    best.nodes = nodes;
    best.wall_seconds = elapsed();
    if (limit_hit) {
        const prec_t gap = (incumbent - global_bound) / std::max<prec_t>(1.0, std::abs(incumbent));
        if (gap > opts.mip_rel_gap) {
            best.status = SolveStatus::node_limit;
            best.certified = false;
            std::ostringstream msg;
            msg << "incumbent with relative gap " << gap;
            best.message = msg.str();
        }
    }
    return best;
}

}  // namespace drccmdp
