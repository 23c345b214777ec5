#include "obstrade/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <spdlog/spdlog.h>

namespace obstrade::sdp {

// ---------------------------------------------------------------------------
// Problem description

int SdpProblem::add_variable(std::string name) {
    names_.push_back(std::move(name));
    RVec c = RVec::Zero(static_cast<Eigen::Index>(names_.size()));
    c.head(c_.size()) = c_;
    c_ = c;
    return num_variables() - 1;
}

int SdpProblem::add_block(int dim, bool complex) {
    if (dim <= 0) throw ValidationError("LMI block dimension must be positive");
    LmiBlock b;
    b.dim = dim;
    b.complex = complex;
    b.constant = CMat::Zero(dim, dim);
    blocks_.push_back(std::move(b));
    return num_blocks() - 1;
}

void SdpProblem::add_constant(int block, int r0, int c0, const CMat& g) {
    LmiBlock& b = blocks_.at(static_cast<size_t>(block));
    b.constant.block(r0, c0, g.rows(), g.cols()) += g;
    if (r0 != c0) b.constant.block(c0, r0, g.cols(), g.rows()) += g.adjoint();
}

void SdpProblem::add_term(int block, int var, int r0, int c0, const CMat& g) {
    std::vector<Entry> e;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            if (g(i, j) == cplx(0.0)) continue;
            e.push_back({r0 + static_cast<int>(i), c0 + static_cast<int>(j), g(i, j)});
            if (r0 != c0)
                e.push_back({c0 + static_cast<int>(j), r0 + static_cast<int>(i), std::conj(g(i, j))});
        }
    add_term_entries(block, var, std::move(e));
}

void SdpProblem::add_term_entries(int block, int var, std::vector<Entry> entries) {
    if (var < 0 || var >= num_variables()) throw ValidationError("unknown SDP variable");
    blocks_.at(static_cast<size_t>(block)).terms.emplace_back(var, std::move(entries));
}

void SdpProblem::validate() const {
    std::vector<bool> used(static_cast<size_t>(num_variables()), false);
    for (const LmiBlock& b : blocks_) {
        if (b.constant.rows() != b.dim || !is_hermitian(b.constant, 1e-10))
            throw ValidationError("LMI block constant is not Hermitian");
        if (!b.complex && b.constant.imag().cwiseAbs().maxCoeff() > 0)
            throw ValidationError("real LMI block has a complex constant");
        std::map<int, CMat> acc;
        for (const auto& [var, entries] : b.terms) {
            auto it = acc.find(var);
            if (it == acc.end()) it = acc.emplace(var, CMat::Zero(b.dim, b.dim)).first;
            for (const Entry& e : entries) {
                if (e.row < 0 || e.col < 0 || e.row >= b.dim || e.col >= b.dim)
                    throw ValidationError("LMI coefficient entry out of range");
                if (!b.complex && e.value.imag() != 0.0)
                    throw ValidationError("real LMI block has a complex coefficient");
                it->second(e.row, e.col) += e.value;
            }
        }
        for (const auto& [var, m] : acc) {
            if (!is_hermitian(m, 1e-10))
                throw ValidationError("coefficient of variable '" + name(var) + "' is not Hermitian");
            if (m.cwiseAbs().maxCoeff() > 0) used[static_cast<size_t>(var)] = true;
        }
    }
    for (const Equality& e : eqs_)
        for (const LinearTerm& t : e.terms) {
            if (t.var < 0 || t.var >= num_variables())
                throw ValidationError("equality refers to an unknown variable");
            if (t.coeff != 0.0) used[static_cast<size_t>(t.var)] = true;
        }
    for (int i = 0; i < num_variables(); ++i)
        if (!used[static_cast<size_t>(i)])
            throw ValidationError("variable '" + name(i) + "' appears in no constraint");
    if (!c_.allFinite()) throw ValidationError("objective has non-finite coefficients");
}

CMat SdpProblem::evaluate_block(int bi, const RVec& y) const {
    const LmiBlock& b = blocks_.at(static_cast<size_t>(bi));
    CMat f = b.constant;
    for (const auto& [var, entries] : b.terms)
        for (const Entry& e : entries) f(e.row, e.col) += y(var) * e.value;
    return f;
}

HermitianVar::HermitianVar(SdpProblem& p, int d, const std::string& name) : d_(d) {
    for (int a = 0; a < d; ++a) {
        CMat b = CMat::Zero(d, d);
        b(a, a) = 1.0;
        basis_.emplace_back(p.add_variable(name + "[" + std::to_string(a) + "," + std::to_string(a) + "]"), b);
    }
    for (int a = 0; a < d; ++a)
        for (int c = a + 1; c < d; ++c) {
            const std::string idx = std::to_string(a) + "," + std::to_string(c);
            CMat re = CMat::Zero(d, d);
            re(a, c) = re(c, a) = 1.0;
            basis_.emplace_back(p.add_variable(name + ".re[" + idx + "]"), re);
            CMat im = CMat::Zero(d, d);
            im(a, c) = cplx(0, 1);
            im(c, a) = cplx(0, -1);
            basis_.emplace_back(p.add_variable(name + ".im[" + idx + "]"), im);
        }
}

CMat HermitianVar::value(const RVec& y) const {
    CMat h = CMat::Zero(d_, d_);
    for (const auto& [var, b] : basis_) h += y(var) * b;
    return h;
}

void HermitianVar::place(SdpProblem& p, int block, int r0, int c0, double scale) const {
    for (const auto& [var, b] : basis_) p.add_term(block, var, r0, c0, scale * b);
}

void HermitianVar::add_objective_trace(SdpProblem& p, const CMat& c, double scale) const {
    for (const auto& [var, b] : basis_) p.add_objective(var, scale * trace_prod(c, b).real());
}

std::string to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Real symmetric working form

namespace {

// v * (E_rc + E_cr) when r < c, v * E_rr when r == c.
struct Half {
    int r;
    int c;
    double v;
};

using HalfList = std::vector<Half>;

struct RealBlock {
    int n = 0;
    int complex_dim = 0;  // > 0 when the block embeds a complex one
    RMat constant;
    std::vector<std::pair<int, HalfList>> coef;  // (working var, entries)
};

struct RealForm {
    std::vector<RealBlock> blocks;
    RVec c;
    double c0 = 0.0;
    int m = 0;
    // y_original = y0 + N z.
    RVec y0;
    RMat null_basis;
    bool eliminated = false;
};

HalfList to_half(const std::map<std::pair<int, int>, double>& full) {
    HalfList out;
    for (const auto& [rc, v] : full)
        if (rc.first <= rc.second && v != 0.0) out.push_back({rc.first, rc.second, v});
    return out;
}

// Full real entries of the embedding [[Re, -Im], [Im, Re]] of a complex Hermitian block.
void embed_entries(const std::vector<Entry>& in, int n, bool complex, double scale,
                   std::map<std::pair<int, int>, double>& out) {
    for (const Entry& e : in) {
        const double re = scale * e.value.real();
        const double im = scale * e.value.imag();
        if (!complex) {
            out[{e.row, e.col}] += re;
            continue;
        }
        out[{e.row, e.col}] += re;
        out[{e.row + n, e.col + n}] += re;
        out[{e.row + n, e.col}] += im;
        out[{e.row, e.col + n}] -= im;
    }
}

RMat embed_dense(const CMat& c, bool complex) {
    if (!complex) return c.real();
    const Eigen::Index n = c.rows();
    RMat r(2 * n, 2 * n);
    r << c.real(), -c.imag(), c.imag(), c.real();
    return r;
}

double inner(const HalfList& h, const RMat& x) {
    double s = 0.0;
    for (const Half& e : h) s += e.r == e.c ? e.v * x(e.r, e.r) : 2.0 * e.v * x(e.r, e.c);
    return s;
}

void accumulate(const HalfList& h, double a, RMat& x) {
    for (const Half& e : h) {
        x(e.r, e.c) += a * e.v;
        if (e.r != e.c) x(e.c, e.r) += a * e.v;
    }
}

RealForm realize(const SdpProblem& p) {
    RealForm rf;
    const int m0 = p.num_variables();
    // Per block, per original variable, accumulated full real entries.
    std::vector<std::map<int, std::map<std::pair<int, int>, double>>> full(
        static_cast<size_t>(p.num_blocks()));
    std::vector<RMat> consts;
    for (int b = 0; b < p.num_blocks(); ++b) {
        const LmiBlock& blk = p.block(b);
        for (const auto& [var, entries] : blk.terms)
            embed_entries(entries, blk.dim, blk.complex, 1.0, full[static_cast<size_t>(b)][var]);
        consts.push_back(embed_dense(0.5 * (blk.constant + blk.constant.adjoint()), blk.complex));
    }

    const auto& eqs = p.equalities();
    rf.c0 = p.objective_constant();
    if (eqs.empty()) {
        rf.m = m0;
        rf.c = p.objective();
        for (int b = 0; b < p.num_blocks(); ++b) {
            RealBlock rb;
            rb.n = static_cast<int>(consts[static_cast<size_t>(b)].rows());
            rb.complex_dim = p.block(b).complex ? p.block(b).dim : 0;
            rb.constant = consts[static_cast<size_t>(b)];
            for (const auto& [var, ent] : full[static_cast<size_t>(b)]) {
                HalfList h = to_half(ent);
                if (!h.empty()) rb.coef.emplace_back(var, std::move(h));
            }
            rf.blocks.push_back(std::move(rb));
        }
        return rf;
    }

    // Eliminate the equalities: y = y0 + N z over an independent subset.
    RMat a = RMat::Zero(static_cast<Eigen::Index>(eqs.size()), m0);
    RVec rhs(static_cast<Eigen::Index>(eqs.size()));
    for (size_t k = 0; k < eqs.size(); ++k) {
        for (const LinearTerm& t : eqs[k].terms) a(static_cast<Eigen::Index>(k), t.var) += t.coeff;
        rhs(static_cast<Eigen::Index>(k)) = eqs[k].rhs;
    }
    Eigen::JacobiSVD<RMat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVec& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10 * std::max(1.0, smax)) ++rank;
    RVec y0 = RVec::Zero(m0);
    for (int i = 0; i < rank; ++i)
        y0 += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(rhs) / sv(i));
    const double eq_res = (a * y0 - rhs).norm();
    if (eq_res > 1e-8 * (1.0 + rhs.norm()))
        throw ValidationError("SDP equality constraints are inconsistent (residual " +
                              std::to_string(eq_res) + ")");
    rf.eliminated = true;
    rf.y0 = y0;
    rf.null_basis = svd.matrixV().rightCols(m0 - rank);
    rf.m = m0 - rank;
    rf.c = rf.null_basis.transpose() * p.objective();
    rf.c0 += p.objective().dot(y0);
    for (int b = 0; b < p.num_blocks(); ++b) {
        RealBlock rb;
        rb.n = static_cast<int>(consts[static_cast<size_t>(b)].rows());
        rb.complex_dim = p.block(b).complex ? p.block(b).dim : 0;
        rb.constant = consts[static_cast<size_t>(b)];
        const auto& fb = full[static_cast<size_t>(b)];
        for (const auto& [var, ent] : fb)
            for (const auto& [rc, v] : ent) rb.constant(rc.first, rc.second) += y0(var) * v;
        for (int l = 0; l < rf.m; ++l) {
            std::map<std::pair<int, int>, double> comb;
            for (const auto& [var, ent] : fb) {
                const double w = rf.null_basis(var, l);
                if (std::abs(w) < 1e-15) continue;
                for (const auto& [rc, v] : ent) comb[rc] += w * v;
            }
            HalfList h;
            for (const auto& [rc, v] : comb)
                if (rc.first <= rc.second && std::abs(v) > 1e-14) h.push_back({rc.first, rc.second, v});
            if (!h.empty()) rb.coef.emplace_back(l, std::move(h));
        }
        rf.blocks.push_back(std::move(rb));
    }
    return rf;
}

struct BlockScaling {
    RMat g;     // W = G G'
    RMat ginv;  // G^{-1}
    RMat w;
    RVec v;     // scaled point diag(V) with G^{-1} X G^{-T} = G' Z G = V
};

bool compute_scaling(const RMat& x, const RMat& z, BlockScaling& s) {
    Eigen::LLT<RMat> lx(x);
    if (lx.info() != Eigen::Success) return false;
    const RMat l = lx.matrixL();
    const RMat ltzl = l.transpose() * z * l;
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (ltzl + ltzl.transpose()));
    RVec d = es.eigenvalues();
    if (d.minCoeff() <= 0.0) return false;
    const RMat& u = es.eigenvectors();
    const RVec dq = d.array().pow(-0.25);
    s.g = l * u * dq.asDiagonal();
    const RMat linv = l.triangularView<Eigen::Lower>().solve(RMat::Identity(x.rows(), x.cols()));
    s.ginv = d.array().pow(0.25).matrix().asDiagonal() * u.transpose() * linv;
    s.w = s.g * s.g.transpose();
    s.w = 0.5 * (s.w + s.w.transpose().eval());
    s.v = d.array().sqrt();
    return true;
}

// Largest alpha with x + alpha dx PSD, infinity when unbounded.
double max_step(const RMat& x, const RMat& dx) {
    Eigen::LLT<RMat> lx(x);
    if (lx.info() != Eigen::Success) return 0.0;
    const RMat l = lx.matrixL();
    RMat t = l.triangularView<Eigen::Lower>().solve(dx);
    t = l.triangularView<Eigen::Lower>().solve(t.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (t + t.transpose()), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

struct Iterate {
    std::vector<RMat> x;
    std::vector<RMat> z;
    RVec y;
};

class Ipm {
public:
    Ipm(const RealForm& rf, const Settings& st) : rf_(rf), st_(st) {}

    SdpSolution run();

private:
    RVec a_of(const std::vector<RMat>& x) const {
        RVec out = RVec::Zero(rf_.m);
        for (const RealBlock& b : rf_.blocks) {
            const RMat& xb = x[static_cast<size_t>(&b - rf_.blocks.data())];
            for (const auto& [var, h] : b.coef) out(var) += inner(h, xb);
        }
        return out;
    }

    std::vector<RMat> f_of(const RVec& y, bool with_constant) const {
        std::vector<RMat> out;
        for (const RealBlock& b : rf_.blocks) {
            RMat f = with_constant ? b.constant : RMat::Zero(b.n, b.n);
            for (const auto& [var, h] : b.coef) accumulate(h, y(var), f);
            out.push_back(std::move(f));
        }
        return out;
    }

    void build_schur(const std::vector<BlockScaling>& sc, RMat& m) const;

    const RealForm& rf_;
    const Settings& st_;
};

void Ipm::build_schur(const std::vector<BlockScaling>& sc, RMat& m) const {
    m.setZero(rf_.m, rf_.m);
    for (size_t bi = 0; bi < rf_.blocks.size(); ++bi) {
        const RealBlock& b = rf_.blocks[bi];
        const RMat& w = sc[bi].w;
        const size_t nv = b.coef.size();
        double nnz = 0.0;
        for (const auto& t : b.coef) nnz += static_cast<double>(t.second.size());
        const double sparse_cost = nnz * nnz;
        const double dense_cost = static_cast<double>(nv) * 2.0 * std::pow(b.n, 3) + nnz * static_cast<double>(nv);
        if (sparse_cost <= dense_cost) {
            // Scaled copies so that each pair costs two products per entry pair.
            std::vector<HalfList> hs(nv);
            for (size_t i = 0; i < nv; ++i) {
                hs[i] = b.coef[i].second;
                for (Half& e : hs[i]) e.v *= e.r == e.c ? M_SQRT1_2 : M_SQRT2;
            }
            for (size_t i = 0; i < nv; ++i) {
                const int vi = b.coef[i].first;
                for (size_t j = i; j < nv; ++j) {
                    const int vj = b.coef[j].first;
                    double s = 0.0;
                    for (const Half& e : hs[i])
                        for (const Half& f : hs[j])
                            s += e.v * f.v * (w(e.c, f.r) * w(f.c, e.r) + w(e.c, f.c) * w(f.r, e.r));
                    m(vi, vj) += s;
                    if (vi != vj) m(vj, vi) += s;
                }
            }
        } else {
            RMat fj(b.n, b.n);
            for (size_t j = 0; j < nv; ++j) {
                fj.setZero();
                accumulate(b.coef[j].second, 1.0, fj);
                const RMat t = w * fj * w;
                const int vj = b.coef[j].first;
                for (size_t i = 0; i <= j; ++i) {
                    const int vi = b.coef[i].first;
                    const double s = inner(b.coef[i].second, t);
                    m(vi, vj) += s;
                    if (vi != vj) m(vj, vi) += s;
                }
            }
        }
    }
}

SdpSolution Ipm::run() {
    const size_t nb = rf_.blocks.size();
    int ntot = 0;
    for (const RealBlock& b : rf_.blocks) ntot += b.n;

    Iterate it;
    it.y = RVec::Zero(rf_.m);
    for (const RealBlock& b : rf_.blocks) {
        double max_ratio = 0.0, max_fnorm = 0.0;
        for (const auto& [var, h] : b.coef) {
            RMat f = RMat::Zero(b.n, b.n);
            accumulate(h, 1.0, f);
            const double fn = f.norm();
            max_fnorm = std::max(max_fnorm, fn);
            max_ratio = std::max(max_ratio, (1.0 + std::abs(rf_.c(var))) / (1.0 + fn));
        }
        const double sq = std::sqrt(static_cast<double>(b.n));
        const double xi = std::max({10.0, sq, b.n * max_ratio});
        const double eta = std::max({10.0, sq, max_fnorm, b.constant.norm()});
        it.x.push_back(xi * RMat::Identity(b.n, b.n));
        it.z.push_back(eta * RMat::Identity(b.n, b.n));
    }

    const double cnorm = rf_.c.norm();
    double f0norm = 0.0;
    for (const RealBlock& b : rf_.blocks) f0norm += b.constant.squaredNorm();
    f0norm = std::sqrt(f0norm);

    // Gram matrix of the constraint matrices, used to project dX back onto A(X) = c.
    std::vector<BlockScaling> unit(nb);
    for (size_t b = 0; b < nb; ++b) unit[b].w = RMat::Identity(rf_.blocks[b].n, rf_.blocks[b].n);
    RMat gram;
    build_schur(unit, gram);
    const Eigen::LDLT<RMat> gram_f(gram);

    SdpSolution sol;
    Iterate best = it;
    double best_merit = std::numeric_limits<double>::infinity();
    Residuals best_res;

    std::vector<BlockScaling> sc(nb);
    RMat schur;
    for (int iter = 0; iter <= st_.max_iters; ++iter) {
        // Residuals.
        const RVec rp = rf_.c - a_of(it.x);
        std::vector<RMat> rd = f_of(it.y, true);
        double rdn = 0.0, xz = 0.0, pobj_lower = 0.0, xnorm = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            rd[b] -= it.z[b];
            rdn += rd[b].squaredNorm();
            xz += (it.x[b].array() * it.z[b].array()).sum();
            pobj_lower -= (rf_.blocks[b].constant.array() * it.x[b].array()).sum();
            xnorm += it.x[b].squaredNorm();
        }
        rdn = std::sqrt(rdn);
        xnorm = std::sqrt(xnorm);
        const double upper = rf_.c.dot(it.y);
        const double pinf = rp.norm() / (1.0 + cnorm);
        const double dinf = rdn / (1.0 + f0norm);
        const double denom = 1.0 + std::abs(upper + rf_.c0) + std::abs(pobj_lower + rf_.c0);
        const double relgap = std::max(std::abs(xz), std::abs(upper - pobj_lower)) / denom;
        const double merit = std::max({pinf / st_.tol_feas, dinf / st_.tol_feas, relgap / st_.tol_gap});
        if (merit < best_merit) {
            best_merit = merit;
            best = it;
            best_res = {pinf, dinf, relgap};
        }
        if (st_.verbose)
            spdlog::info("sdp iter {:3d} obj {: .10e} lb {: .10e} pinf {:.2e} dinf {:.2e} gap {:.2e}",
                         iter, upper + rf_.c0, pobj_lower + rf_.c0, pinf, dinf, relgap);
        sol.iterations = iter;
        if (pinf < st_.tol_feas && dinf < st_.tol_feas && relgap < st_.tol_gap) {
            sol.status = Status::optimal;
            break;
        }
        if (iter == st_.max_iters) {
            sol.status = Status::numerical_failure;
            sol.message = "iteration limit reached";
            break;
        }
        // Divergence heuristics in place of a self-dual embedding.
        if (it.y.norm() > 1e10 * (1.0 + f0norm) && dinf < 1e-3) {
            sol.status = Status::unbounded;
            sol.message = "dual iterates diverge with a decreasing objective";
            break;
        }
        if (xnorm > 1e10 * (1.0 + cnorm) && pinf < 1e-3) {
            sol.status = Status::infeasible;
            sol.message = "multiplier iterates diverge; LMI appears infeasible";
            break;
        }

        bool ok = true;
        for (size_t b = 0; b < nb && ok; ++b) ok = compute_scaling(it.x[b], it.z[b], sc[b]);
        if (!ok) {
            sol.status = Status::numerical_failure;
            sol.message = "lost positive definiteness of an iterate";
            break;
        }
        build_schur(sc, schur);
        const RMat schur0 = schur;
        Eigen::LLT<RMat> llt(schur);
        Eigen::LDLT<RMat> ldlt;
        bool use_ldlt = false;
        if (llt.info() != Eigen::Success) {
            const double shift = 1e-13 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
            schur.diagonal().array() += shift;
            llt.compute(schur);
            if (llt.info() != Eigen::Success) {
                ldlt.compute(schur);
                use_ldlt = true;
            }
        }
        // Refinement against the unshifted matrix recovers digits lost near the optimum.
        auto solve_schur = [&](const RVec& r) -> RVec {
            auto once = [&](const RVec& v) { return use_ldlt ? RVec(ldlt.solve(v)) : RVec(llt.solve(v)); };
            RVec x = once(r);
            for (int k = 0; k < 3; ++k) {
                const RVec res = r - schur0 * x;
                if (res.norm() <= 1e-15 * (1.0 + r.norm())) break;
                x += once(res);
            }
            return x;
        };

        std::vector<RMat> wrdw(nb);
        for (size_t b = 0; b < nb; ++b) wrdw[b] = sc[b].w * rd[b] * sc[b].w;
        const RVec a_wrdw = a_of(wrdw);

        auto direction = [&](const std::vector<RMat>& rc, std::vector<RMat>& dx, RVec& dy,
                             std::vector<RMat>& dz) {
            const RVec rhs = a_of(rc) - a_wrdw - rp;
            dy = solve_schur(rhs);
            dz = f_of(dy, false);
            dx.resize(nb);
            for (size_t b = 0; b < nb; ++b) {
                dz[b] += rd[b];
                dx[b] = rc[b] - sc[b].w * dz[b] * sc[b].w;
                dx[b] = 0.5 * (dx[b] + dx[b].transpose().eval());
            }
            const RVec miss = rp - a_of(dx);
            if (gram_f.info() == Eigen::Success && miss.size() > 0) {
                const std::vector<RMat> fix = f_of(RVec(gram_f.solve(miss)), false);
                for (size_t b = 0; b < nb; ++b) dx[b] += fix[b];
            }
        };
        auto steps = [&](const std::vector<RMat>& dx, const std::vector<RMat>& dz) {
            double ap = std::numeric_limits<double>::infinity();
            double ad = ap;
            for (size_t b = 0; b < nb; ++b) {
                ap = std::min(ap, max_step(it.x[b], dx[b]));
                ad = std::min(ad, max_step(it.z[b], dz[b]));
            }
            return std::make_pair(ap, ad);
        };

        // Predictor.
        std::vector<RMat> rc(nb), dx, dz;
        RVec dy;
        for (size_t b = 0; b < nb; ++b) rc[b] = -it.x[b];
        direction(rc, dx, dy, dz);
        auto [ap_max, ad_max] = steps(dx, dz);
        const double ap = std::min(1.0, ap_max);
        const double ad = std::min(1.0, ad_max);
        const double mu = xz / ntot;
        double xz_aff = 0.0;
        for (size_t b = 0; b < nb; ++b)
            xz_aff += ((it.x[b] + ap * dx[b]).array() * (it.z[b] + ad * dz[b]).array()).sum();
        const double mu_aff = std::max(0.0, xz_aff / ntot);
        const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap, ad), 2));
        const double sigma = std::clamp(std::pow(mu_aff / mu, expon), 0.0, 1.0);

        // Corrector with second-order term in the scaled space.
        for (size_t b = 0; b < nb; ++b) {
            const BlockScaling& s = sc[b];
            const RMat dxs = s.ginv * dx[b] * s.ginv.transpose();
            const RMat dzs = s.g.transpose() * dz[b] * s.g;
            const RMat cc = dxs * dzs + dzs * dxs;
            const int n = rf_.blocks[b].n;
            RMat dsol(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double num = -cc(i, j);
                    if (i == j) num += 2.0 * sigma * mu - 2.0 * s.v(i) * s.v(i);
                    dsol(i, j) = num / (s.v(i) + s.v(j));
                }
            rc[b] = s.g * dsol * s.g.transpose();
            rc[b] = 0.5 * (rc[b] + rc[b].transpose().eval());
        }
        direction(rc, dx, dy, dz);
        auto [cp_max, cd_max] = steps(dx, dz);
        const double tau = 0.9 + 0.09 * std::min(ap, ad);
        const double sp = std::min(1.0, tau * cp_max);
        const double sd = std::min(1.0, tau * cd_max);
        for (size_t b = 0; b < nb; ++b) {
            it.x[b] += sp * dx[b];
            it.z[b] += sd * dz[b];
            it.x[b] = 0.5 * (it.x[b] + it.x[b].transpose().eval());
            it.z[b] = 0.5 * (it.z[b] + it.z[b].transpose().eval());
        }
        it.y += sd * dy;
        if (!(sp > 1e-14 || sd > 1e-14)) {
            sol.status = Status::numerical_failure;
            sol.message = "step length collapsed";
            break;
        }
    }
    if (sol.status != Status::optimal) {
        it = best;
        sol.residuals = best_res;
    }

    // Map back to the caller's variables.
    const RVec yz = it.y;
    sol.y = rf_.eliminated ? RVec(rf_.y0 + rf_.null_basis * yz) : yz;
    double lower = 0.0;
    for (size_t b = 0; b < nb; ++b) {
        lower -= (rf_.blocks[b].constant.array() * it.x[b].array()).sum();
        const RealBlock& rb = rf_.blocks[b];
        if (rb.complex_dim > 0) {
            const int n = rb.complex_dim;
            const RMat& x = it.x[b];
            CMat xc(n, n);
            xc.real() = x.topLeftCorner(n, n) + x.bottomRightCorner(n, n);
            xc.imag() = x.bottomLeftCorner(n, n) - x.topRightCorner(n, n);
            sol.block_duals.push_back(0.5 * (xc + xc.adjoint()));
        } else {
            sol.block_duals.push_back(it.x[b].cast<cplx>());
        }
    }
    sol.objective_value = rf_.c.dot(yz) + rf_.c0;
    sol.dual_objective = lower + rf_.c0;
    if (sol.status == Status::optimal) {
        const RVec rp = rf_.c - a_of(it.x);
        std::vector<RMat> rd = f_of(it.y, true);
        double rdn = 0.0, xz = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            rd[b] -= it.z[b];
            rdn += rd[b].squaredNorm();
            xz += (it.x[b].array() * it.z[b].array()).sum();
        }
        const double denom = 1.0 + std::abs(sol.objective_value) + std::abs(sol.dual_objective);
        sol.residuals = {rp.norm() / (1.0 + cnorm), std::sqrt(rdn) / (1.0 + f0norm),
                         std::max(std::abs(xz), std::abs(sol.objective_value - sol.dual_objective)) / denom};
    }
    return sol;
}

}  // namespace

SdpSolution solve(const SdpProblem& p, const Settings& settings) {
    p.validate();
    const RealForm rf = realize(p);
    SdpSolution sol;
    if (rf.m == 0) {
        // Fully determined by the equalities.
        sol.y = rf.eliminated ? rf.y0 : RVec::Zero(0);
        sol.objective_value = sol.dual_objective = rf.c0;
        double lmin = std::numeric_limits<double>::infinity();
        for (const RealBlock& b : rf.blocks) {
            Eigen::SelfAdjointEigenSolver<RMat> es(b.constant, Eigen::EigenvaluesOnly);
            lmin = std::min(lmin, es.eigenvalues()(0));
            const int n = b.complex_dim > 0 ? b.complex_dim : b.n;
            sol.block_duals.push_back(CMat::Zero(n, n));
        }
        sol.status = lmin >= -settings.tol_feas ? Status::optimal : Status::infeasible;
    } else {
        Ipm ipm(rf, settings);
        sol = ipm.run();
    }
    // Equality multipliers by least squares on the stationarity condition.
    const auto& eqs = p.equalities();
    if (!eqs.empty()) {
        RMat a = RMat::Zero(static_cast<Eigen::Index>(eqs.size()), p.num_variables());
        for (size_t k = 0; k < eqs.size(); ++k)
            for (const LinearTerm& t : eqs[k].terms) a(static_cast<Eigen::Index>(k), t.var) += t.coeff;
        RVec g = p.objective();
        for (int b = 0; b < p.num_blocks(); ++b)
            for (const auto& [var, entries] : p.block(b).terms)
                for (const Entry& e : entries)
                    g(var) -= (e.value * sol.block_duals[static_cast<size_t>(b)](e.col, e.row)).real();
        sol.equality_duals = a.transpose().completeOrthogonalDecomposition().solve(g);
    }
    return sol;
}

Residuals verify(const SdpSolution& s, const SdpProblem& p) {
    Residuals r;
    const RVec& y = s.y;
    if (y.size() != p.num_variables()) throw ValidationError("solution has the wrong variable count");
    // Primal: LMI violation and equality residual.
    for (int b = 0; b < p.num_blocks(); ++b) {
        const CMat f = p.evaluate_block(b, y);
        const double lmin = Eigen::SelfAdjointEigenSolver<CMat>(0.5 * (f + f.adjoint()),
                                                                Eigen::EigenvaluesOnly)
                                .eigenvalues()(0);
        r.primal = std::max(r.primal, -lmin);
    }
    RVec g = p.objective();
    double dual_obj = p.objective_constant();
    for (const Equality& e : p.equalities()) {
        double lhs = 0.0;
        for (const LinearTerm& t : e.terms) lhs += t.coeff * y(t.var);
        r.primal = std::max(r.primal, std::abs(lhs - e.rhs));
    }
    // Dual: stationarity c - F*(X) - A'nu = 0 and X PSD.
    for (int b = 0; b < p.num_blocks(); ++b) {
        if (static_cast<size_t>(b) >= s.block_duals.size()) break;
        const CMat& x = s.block_duals[static_cast<size_t>(b)];
        for (const auto& [var, entries] : p.block(b).terms)
            for (const Entry& e : entries) g(var) -= (e.value * x(e.col, e.row)).real();
        dual_obj -= trace_prod(p.block(b).constant, x).real();
        const double lmin =
            Eigen::SelfAdjointEigenSolver<CMat>(x, Eigen::EigenvaluesOnly).eigenvalues()(0);
        r.dual = std::max(r.dual, -lmin);
    }
    const auto& eqs = p.equalities();
    for (size_t k = 0; k < eqs.size() && static_cast<Eigen::Index>(k) < s.equality_duals.size(); ++k) {
        const double nu = s.equality_duals(static_cast<Eigen::Index>(k));
        for (const LinearTerm& t : eqs[k].terms) g(t.var) -= nu * t.coeff;
        dual_obj += nu * eqs[k].rhs;
    }
    r.dual = std::max(r.dual, g.cwiseAbs().maxCoeff());
    const double pobj = p.evaluate_objective(y);
    r.gap = std::abs(pobj - dual_obj) / (1.0 + std::abs(pobj) + std::abs(dual_obj));
    return r;
}

}  // namespace obstrade::sdp
