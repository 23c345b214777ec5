#include "obstrade/e0.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>

#include <gsl/gsl_multimin.h>

#include "obstrade/analytic.hpp"

namespace obstrade {

namespace {

constexpr double kTightTol = 1e-6;

RMat weights_or_identity(const RMat& w, int n) {
    if (w.size() == 0) return RMat::Identity(n, n);
    validate_weights(w, n);
    return 0.5 * (w + w.transpose());
}

std::vector<CVec> acting_on(const ObservableSet& x, const CVec& v) {
    std::vector<CVec> out;
    for (int j = 0; j < x.size(); ++j) out.push_back(x[j] * v);
    return out;
}

// Columns of the returned matrix span the orthogonal complement of psi.
CMat complement_of(const CVec& psi) {
    const int d = static_cast<int>(psi.size());
    const CMat col = psi;
    Eigen::HouseholderQR<CMat> qr(col);
    const CMat q = qr.householderQ() * CMat::Identity(d, d);
    return q.rightCols(d - 1);
}

// Modified Gram-Schmidt over the candidate columns, keeping at most `cols` vectors.
CMat gram_schmidt(const std::vector<CVec>& cand, int cols) {
    const int d = static_cast<int>(cand.front().size());
    CMat u(d, cols);
    int k = 0;
    for (const CVec& c : cand) {
        if (k == cols) break;
        CVec v = c;
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < k; ++i) v -= u.col(i).dot(v) * u.col(i);
        const double nv = v.norm();
        if (nv < 1e-10 * std::max(1.0, c.norm())) continue;
        u.col(k++) = v / nv;
    }
    if (k < cols) throw SolverError("frame construction ran out of independent vectors");
    return u;
}

struct Frame {
    CMat u;
    RMat y;  // r_j = u * y.col(j)
    double value = 0.0;
};

// Maximizes ||Re(U^dag X) W^{1/2}||_F^2 over frames whose first column is psi by
// repeatedly maximizing its linearization (the objective is convex in U).
Frame polish_frame(const CVec& psi, const CMat& xm, const RMat& w, CMat u) {
    const CMat c = complement_of(psi);
    const double base = (w.array() * (xm.adjoint() * xm).real().array()).sum();
    const int cols = static_cast<int>(u.cols());
    auto gain = [&](const RMat& y) { return (y * w * y.transpose()).trace(); };
    RMat y = (u.adjoint() * xm).real();
    double f = gain(y);
    for (int it = 0; it < 20000 && cols > 1; ++it) {
        const CMat z = xm * w * y.transpose();
        const CMat g = c.adjoint() * z.rightCols(cols - 1);
        Eigen::JacobiSVD<CMat> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
        CMat next = u;
        next.rightCols(cols - 1) = c * (svd.matrixU() * svd.matrixV().adjoint());
        const RMat ny = (next.adjoint() * xm).real();
        const double nf = gain(ny);
        if (nf < f - 1e-14 * std::max(1.0, std::abs(f))) break;
        const bool done = nf - f <= 1e-15 * std::max(1.0, std::abs(f));
        u = next;
        y = ny;
        f = nf;
        if (done) break;
    }
    return {u, y, base - f};
}

Frame best_frame(const CVec& psi, const CMat& xm, const RMat& w, const std::vector<CMat>& seeds) {
    const int d = static_cast<int>(psi.size());
    const int cols = std::min(static_cast<int>(xm.cols()) + 1, d);
    const CMat comp = complement_of(psi);
    Frame best;
    best.value = std::numeric_limits<double>::infinity();
    for (const CMat& seed : seeds) {
        std::vector<CVec> cand{psi};
        for (int j = 0; j < seed.cols(); ++j) cand.push_back(seed.col(j));
        for (int j = 0; j < comp.cols(); ++j) cand.push_back(comp.col(j));
        const Frame f = polish_frame(psi, xm, w, gram_schmidt(cand, cols));
        if (f.value < best.value) best = f;
    }
    return best;
}

OptimalMeasurement finish(const State& psi, const ObservableSet& x, const RMat& w, const Frame& fr,
                          double bound) {
    OptimalMeasurement out{measurement_from_frame(fr.u, fr.y.transpose(), psi.dim()), 0.0, bound,
                           {}, 0.0};
    out.achieved = weighted_error(approx_error_matrix(psi, x, out.measurement), w);
    for (int j = 0; j < x.size(); ++j) out.r_vectors.push_back(fr.u * fr.y.col(j).cast<cplx>());
    return out;
}

}  // namespace

E0Model build_e0_model(const State& rho, const ObservableSet& x, const RMat& w_in) {
    const int n = x.size(), d = x.dim();
    if (rho.dim() != d) throw ValidationError("build_e0: state and observables differ in dimension");
    const RMat w = weights_or_identity(w_in, n);
    E0Model m;
    m.n = n;
    m.d = d;
    sdp::SdpProblem& p = m.problem;
    for (int j = 0; j < n; ++j) m.r.emplace_back(p, d, "R" + std::to_string(j + 1));
    m.s.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        m.s[static_cast<size_t>(j)].resize(static_cast<size_t>(n));
        for (int k = j; k < n; ++k)
            m.s[static_cast<size_t>(j)][static_cast<size_t>(k)] = sdp::HermitianVar(
                p, d, "S" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
    }
    m.block = p.add_block(d * (n + 1));
    p.add_constant(m.block, 0, 0, CMat::Identity(d, d));
    const CMat& r = rho.rho();
    double c0 = 0.0;
    for (int j = 0; j < n; ++j) {
        m.r[static_cast<size_t>(j)].place(p, m.block, d * (j + 1), 0);
        CMat cr = CMat::Zero(d, d);
        for (int k = 0; k < n; ++k) {
            cr -= w(k, j) * (x[k] * r + r * x[k]);
            c0 += w(j, k) * trace_prod(r, x[k] * x[j]).real();
        }
        m.r[static_cast<size_t>(j)].add_objective_trace(p, cr);
        for (int k = j; k < n; ++k) {
            const sdp::HermitianVar& s = m.s[static_cast<size_t>(j)][static_cast<size_t>(k)];
            s.place(p, m.block, d * (j + 1), d * (k + 1));
            s.add_objective_trace(p, r, j == k ? w(j, j) : 2.0 * w(j, k));
        }
    }
    p.set_objective_constant(c0);
    return m;
}

namespace {

// For a pure state the dual block W (x) rho has no interior, which stalls the
// interior-point method. Restricting the LMI to span{psi} in each S row gives a
// (d + n) block with the same optimum. R_j = a_j I + psi b_j V^dag + h.c. then
// lifts back exactly, and the complement part of S is padded until S >= R R^dag.
E0Witness bound_e0_pure(const State& rho, const ObservableSet& x, const RMat& w,
                        const sdp::Settings& settings) {
    const int n = x.size(), d = x.dim();
    const CVec psi = rho.pure_vector();
    const CMat v = complement_of(psi);
    sdp::SdpProblem p;
    const int blk = p.add_block(d + n);
    p.add_constant(blk, 0, 0, CMat::Identity(d, d));
    std::vector<int> a(static_cast<size_t>(n));
    std::vector<std::vector<int>> b(static_cast<size_t>(n));
    std::vector<std::vector<int>> s(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n)));
    double c0 = 0.0;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) c0 += w(j, k) * psi.dot(x[k] * (x[j] * psi)).real();
    // Row j of the reduced R block is psi^dag R_j; g is that row per unit variable.
    auto add_r_var = [&](int j, const std::string& name, const CMat& g) {
        const int var = p.add_variable(name);
        p.add_term(blk, var, d + j, 0, g);
        double c = 0.0;
        for (int k = 0; k < n; ++k) c -= 2.0 * w(k, j) * (g * (x[k] * psi))(0).real();
        p.set_objective(var, c);
        return var;
    };
    for (int j = 0; j < n; ++j) {
        const std::string tag = std::to_string(j + 1);
        a[static_cast<size_t>(j)] = add_r_var(j, "a" + tag, psi.adjoint());
        for (int e = 0; e < d - 1; ++e) {
            const CMat row = v.col(e).adjoint();
            b[static_cast<size_t>(j)].push_back(add_r_var(j, "b" + tag + "re", row));
            b[static_cast<size_t>(j)].push_back(add_r_var(j, "b" + tag + "im", cplx(0, 1) * row));
        }
    }
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            const int var = p.add_variable("s" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
            p.add_term(blk, var, d + j, d + k, CMat::Constant(1, 1, cplx(1.0)));
            p.set_objective(var, j == k ? w(j, j) : 2.0 * w(j, k));
            s[static_cast<size_t>(j)][static_cast<size_t>(k)] = var;
            s[static_cast<size_t>(k)][static_cast<size_t>(j)] = var;
        }
    p.set_objective_constant(c0);

    const sdp::SdpSolution sol = sdp::solve(p, settings);
    E0Witness out;
    out.value = sol.objective_value;
    out.dual_value = sol.dual_objective;
    out.status = sol.status;
    out.residuals = sol.residuals;
    out.iterations = sol.iterations;
    if (sol.y.size() == 0) return out;
    const auto& y = sol.y;
    std::vector<CMat> rows(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        CVec bj(d - 1);
        for (int e = 0; e < d - 1; ++e)
            bj(e) = cplx(y(b[static_cast<size_t>(j)][static_cast<size_t>(2 * e)]),
                         y(b[static_cast<size_t>(j)][static_cast<size_t>(2 * e + 1)]));
        const CMat cross = psi * bj.transpose() * v.adjoint();
        out.r_ops.push_back(y(a[static_cast<size_t>(j)]) * CMat::Identity(d, d) + cross +
                            cross.adjoint());
        rows[static_cast<size_t>(j)] = psi.adjoint() * out.r_ops.back();
    }
    // Complement padding: half the commutators [R_k, R_j] compressed to V, shifted PSD.
    const int m = d - 1;
    CMat comm = CMat::Zero(n * m, n * m);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const CMat& rj = out.r_ops[static_cast<size_t>(j)];
            const CMat& rk = out.r_ops[static_cast<size_t>(k)];
            comm.block(j * m, k * m, m, m) = 0.5 * v.adjoint() * (rk * rj - rj * rk) * v;
        }
    double tau = 0.0;
    if (m > 0) tau = std::max(0.0, -eig_hermitian(0.5 * (comm + comm.adjoint())).values(0));
    out.s_blocks.assign(static_cast<size_t>(n), std::vector<CMat>(static_cast<size_t>(n)));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const CMat& rj = out.r_ops[static_cast<size_t>(j)];
            const CMat& rk = out.r_ops[static_cast<size_t>(k)];
            const cplx on = y(s[static_cast<size_t>(j)][static_cast<size_t>(k)]) -
                            (rows[static_cast<size_t>(j)] * rows[static_cast<size_t>(k)].adjoint())(0);
            CMat pad = comm.block(j * m, k * m, m, m);
            if (j == k) pad += tau * CMat::Identity(m, m);
            CMat sjk = rj * rk + on * psi * psi.adjoint() + v * pad * v.adjoint();
            out.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(k)] = sjk;
        }
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            // Symmetric and Hermitian by construction; average away rounding.
            CMat& sjk = out.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(k)];
            CMat& skj = out.s_blocks[static_cast<size_t>(k)][static_cast<size_t>(j)];
            const CMat avg = 0.25 * (sjk + sjk.adjoint() + skj + skj.adjoint());
            sjk = avg;
            skj = avg;
        }
    for (int j = 0; j < n; ++j) {
        CMat& sjj = out.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(j)];
        sjj = 0.5 * (sjj + sjj.adjoint().eval());
    }
    return out;
}

}  // namespace

E0Witness bound_e0(const State& rho, const ObservableSet& x, const RMat& w_in,
                   const sdp::Settings& settings) {
    if (rho.dim() != x.dim()) throw ValidationError("build_e0: state and observables differ in dimension");
    const RMat w = weights_or_identity(w_in, x.size());
    if (rho.is_pure() && x.dim() > 1) return bound_e0_pure(rho, x, w, settings);
    const E0Model m = build_e0_model(rho, x, w);
    const sdp::SdpSolution sol = sdp::solve(m.problem, settings);
    E0Witness out;
    out.value = sol.objective_value;
    out.dual_value = sol.dual_objective;
    out.status = sol.status;
    out.residuals = sol.residuals;
    out.iterations = sol.iterations;
    if (sol.y.size() == 0) return out;
    out.s_blocks.assign(static_cast<size_t>(m.n), std::vector<CMat>(static_cast<size_t>(m.n)));
    for (int j = 0; j < m.n; ++j) {
        out.r_ops.push_back(m.r[static_cast<size_t>(j)].value(sol.y));
        for (int k = j; k < m.n; ++k) {
            const CMat s = m.s[static_cast<size_t>(j)][static_cast<size_t>(k)].value(sol.y);
            out.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(k)] = s;
            out.s_blocks[static_cast<size_t>(k)][static_cast<size_t>(j)] = s;
        }
    }
    return out;
}

E0Witness bound_e0(const State& rho, const ObservableSet& x, const sdp::Settings& settings) {
    return bound_e0(rho, x, RMat::Identity(x.size(), x.size()), settings);
}

double witness_psd_margin(const E0Witness& w) {
    const int n = static_cast<int>(w.r_ops.size());
    if (n == 0) return 0.0;
    const int d = static_cast<int>(w.r_ops[0].rows());
    CMat a = CMat::Zero(d * (n + 1), d * (n + 1));
    a.topLeftCorner(d, d).setIdentity();
    for (int j = 0; j < n; ++j) {
        a.block(d * (j + 1), 0, d, d) = w.r_ops[static_cast<size_t>(j)];
        a.block(0, d * (j + 1), d, d) = w.r_ops[static_cast<size_t>(j)].adjoint();
        for (int k = 0; k < n; ++k)
            a.block(d * (j + 1), d * (k + 1), d, d) =
                w.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(k)];
    }
    return eig_hermitian(0.5 * (a + a.adjoint())).values(0);
}

RMat dct_matrix(int n) {
    RMat p(n, n);
    for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k)
            p(m, k) = std::sqrt((k == 0 ? 1.0 : 2.0) / n) * std::cos(M_PI * (2 * m + 1) * k / (2.0 * n));
    return p;
}

ApproxMeasurement measurement_from_frame(const CMat& u, const RMat& lambda, int d) {
    const int cols = static_cast<int>(u.cols());
    const int n = static_cast<int>(lambda.rows());
    const RMat p = dct_matrix(cols);
    const CMat rotated = u * p.transpose().cast<cplx>();  // column m = sum_k P(m,k) u_k
    std::vector<CMat> el;
    CMat rest = CMat::Identity(d, d);
    for (int m = 0; m < cols; ++m) {
        el.push_back(rotated.col(m) * rotated.col(m).adjoint());
        rest -= el.back();
    }
    RMat f = (lambda * p.transpose()).array().rowwise() / p.col(0).transpose().array();
    if (cols < d) {
        el.push_back(0.5 * (rest + rest.adjoint()));
        f.conservativeResize(n, cols + 1);
        f.col(cols).setZero();
    }
    return ApproxMeasurement(Povm(el), f);
}

OptimalMeasurement optimal_povm_pure(const State& psi, const ObservableSet& x, const RMat& w_in,
                                     const std::optional<E0Witness>& witness,
                                     const sdp::Settings& settings) {
    if (!psi.is_pure()) throw ValidationError("optimal_povm_pure requires a pure state");
    const int n = x.size();
    const RMat w = weights_or_identity(w_in, n);
    const E0Witness wit = witness ? *witness : bound_e0(psi, x, w, settings);
    if (wit.r_ops.size() != static_cast<size_t>(n))
        throw SolverError("E_0 witness is missing its R operators");
    const CVec v = psi.pure_vector();
    const std::vector<CVec> xv = acting_on(x, v);
    CMat xm(v.size(), n), rm(v.size(), n);
    for (int j = 0; j < n; ++j) {
        xm.col(j) = xv[static_cast<size_t>(j)];
        rm.col(j) = wit.r_ops[static_cast<size_t>(j)] * v;
    }
    const Frame fr = best_frame(v, xm, w, {rm, xm});
    OptimalMeasurement out = finish(psi, x, w, fr, wit.value);
    out.im_gram_raw = (rm.adjoint() * rm).imag().cwiseAbs().maxCoeff();
    if (out.achieved > wit.value + kTightTol)
        throw SolverError("optimal_povm_pure: rectified witness misses E_0 by " +
                          std::to_string(out.achieved - wit.value));
    return out;
}

OptimalMeasurement optimal_povm_pure_two(const State& psi, const CMat& x1, const CMat& x2,
                                         double w1, double w2) {
    const PairBoundTerms t = bound_pure_pair_closed_form(psi, x1, x2, w1, w2);
    const ObservableSet xs({x1, x2}, false);
    RMat w = RMat::Zero(2, 2);
    w(0, 0) = w1;
    w(1, 1) = w2;
    const CVec v = psi.pure_vector();
    const double c1 = v.dot(x1 * v).real(), c2 = v.dot(x2 * v).real();
    const CVec y1 = x1 * v - c1 * v, y2 = x2 * v - c2 * v;
    const cplx i(0, 1);
    CVec r1 = y1, r2 = y2;
    const double scale = std::max(1.0, t.alpha);
    if (std::abs(t.beta) > 1e-12 * scale) {
        const double mu = t.mu_plus;
        if (!(mu > 1e-9 && mu < 1 - 1e-9)) return optimal_povm_pure(psi, xs, w);
        const double s1 = std::sqrt(w1), s2 = std::sqrt(w2);
        const CVec a = (s1 * y1 + i * s2 * y2) / (2 * (1 - mu));
        const CVec b = (s1 * y1 - i * s2 * y2) / (2 * mu);
        r1 = (a + b) / (2 * s1);
        r2 = (a - b) / (2.0 * i * s2);
    }
    const int d = psi.dim();
    const int cols = std::min(3, d);
    std::vector<CVec> cand{v, r1, r2};
    const CMat comp = complement_of(v);
    for (int j = 0; j < comp.cols(); ++j) cand.push_back(comp.col(j));
    const CMat u = gram_schmidt(cand, cols);
    CMat rm(d, 2);
    rm << r1, r2;
    const CMat coef = u.adjoint() * rm;
    if (coef.imag().cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, rm.norm()))
        return optimal_povm_pure(psi, xs, w);
    ApproxMeasurement am = measurement_from_frame(u, coef.real().transpose(), d);
    am.values.row(0).array() += c1;
    am.values.row(1).array() += c2;
    OptimalMeasurement out{am, 0.0, t.value, {r1 + c1 * v, r2 + c2 * v}, 0.0};
    out.achieved = weighted_error(approx_error_matrix(psi, xs, out.measurement), w);
    return out;
}

// ---------------------------------------------------------------------------
// Brute-force oracle.

namespace {

struct OracleProblem {
    int d, n, k;
    CMat rho;
    std::vector<CMat> xrho;  // X_j rho
    RMat base;               // Re Tr(rho X_j X_k)
    RMat w;

    std::vector<CMat> factors(const double* p) const {
        std::vector<CMat> a(static_cast<size_t>(k), CMat(d, d));
        const int half = k * d * d;
        for (int m = 0; m < k; ++m)
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    const int idx = (m * d + r) * d + c;
                    a[static_cast<size_t>(m)](r, c) = cplx(p[idx], p[half + idx]);
                }
        return a;
    }

    double error(const double* p) const {
        const std::vector<CMat> a = factors(p);
        CMat nsum = CMat::Zero(d, d);
        for (const CMat& am : a) nsum += am.adjoint() * am;
        Eigen::SelfAdjointEigenSolver<CMat> es(nsum);
        if (es.eigenvalues()(0) < 1e-12 * std::max(1.0, es.eigenvalues()(d - 1))) return 1e6;
        const CMat ninv = es.eigenvectors() *
                          es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          es.eigenvectors().adjoint();
        RMat q = base;
        RVec g(n);
        for (const CMat& am : a) {
            const CMat b = am * ninv;
            const CMat bd = b.adjoint();
            const double pm = (b * rho * bd).trace().real();
            if (pm < 1e-14) continue;
            for (int j = 0; j < n; ++j)
                g(j) = (b * xrho[static_cast<size_t>(j)] * bd).trace().real();
            q.noalias() -= g * g.transpose() / pm;
        }
        return (w.array() * q.array()).sum();
    }
};

double gsl_f(const gsl_vector* v, void* params) {
    return static_cast<const OracleProblem*>(params)->error(v->data);
}

void gsl_df(const gsl_vector* v, void* params, gsl_vector* g) {
    const auto* op = static_cast<const OracleProblem*>(params);
    std::vector<double> x(v->data, v->data + v->size);
    for (size_t i = 0; i < v->size; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = op->error(x.data());
        x[i] = keep - h;
        const double fm = op->error(x.data());
        x[i] = keep;
        gsl_vector_set(g, i, (fp - fm) / (2 * h));
    }
}

void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
    *f = gsl_f(v, params);
    gsl_df(v, params, g);
}

std::vector<double> run_restart(const OracleProblem& op, std::uint64_t seed,
                                const OracleSettings& st) {
    const size_t dim = static_cast<size_t>(2 * op.k * op.d * op.d);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> g;
    gsl_vector* x = gsl_vector_alloc(dim);
    for (size_t i = 0; i < dim; ++i) gsl_vector_set(x, i, g(rng));

    gsl_multimin_function fn{&gsl_f, dim, const_cast<OracleProblem*>(&op)};
    gsl_vector* step = gsl_vector_alloc(dim);
    gsl_vector_set_all(step, 0.5);
    gsl_multimin_fminimizer* nm = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    gsl_multimin_fminimizer_set(nm, &fn, x, step);
    for (int it = 0; it < st.nm_iterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(nm)) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm), 1e-9) == GSL_SUCCESS) break;
    }
    gsl_vector_memcpy(x, nm->x);
    gsl_multimin_fminimizer_free(nm);
    gsl_vector_free(step);

    gsl_multimin_function_fdf fdf{&gsl_f, &gsl_df, &gsl_fdf, dim, const_cast<OracleProblem*>(&op)};
    gsl_multimin_fdfminimizer* bf = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, dim);
    gsl_multimin_fdfminimizer_set(bf, &fdf, x, 0.01, 0.1);
    for (int it = 0; it < st.polish_iterations; ++it) {
        if (gsl_multimin_fdfminimizer_iterate(bf)) break;
        if (gsl_multimin_test_gradient(bf->gradient, 1e-9) == GSL_SUCCESS) break;
    }
    const double fb = bf->f;
    const double fx = op.error(x->data);
    std::vector<double> out = fb < fx ? std::vector<double>(bf->x->data, bf->x->data + dim)
                                      : std::vector<double>(x->data, x->data + dim);
    gsl_multimin_fdfminimizer_free(bf);
    gsl_vector_free(x);
    return out;
}

}  // namespace

OracleResult brute_force_min_error(const State& rho, const ObservableSet& x, const RMat& w_in,
                                   const OracleSettings& st) {
    if (st.restarts < 1) throw ValidationError("oracle needs at least one restart");
    const int n = x.size(), d = x.dim();
    if (rho.dim() != d) throw ValidationError("oracle: state and observables differ in dimension");
    OracleProblem op;
    op.d = d;
    op.n = n;
    op.k = st.outcomes > 0 ? st.outcomes : n + 2;
    op.rho = rho.rho();
    op.w = weights_or_identity(w_in, n);
    op.base = RMat(n, n);
    for (int j = 0; j < n; ++j) {
        op.xrho.push_back(x[j] * op.rho);
        for (int k = 0; k < n; ++k) op.base(j, k) = trace_prod(op.rho, x[j] * x[k]).real();
    }

    const int r = st.restarts;
    std::vector<std::vector<double>> params(static_cast<size_t>(r));
    std::vector<double> errs(static_cast<size_t>(r));
    std::mutex mu;
    int next = 0;
    auto worker = [&]() {
        for (;;) {
            int idx;
            {
                std::lock_guard<std::mutex> lk(mu);
                if (next >= r) return;
                idx = next++;
            }
            // Per-restart seed from the master seed and the restart index.
            std::seed_seq seq{static_cast<std::uint32_t>(st.seed), static_cast<std::uint32_t>(st.seed >> 32),
                              static_cast<std::uint32_t>(idx)};
            std::uint32_t s[2];
            seq.generate(s, s + 2);
            const std::uint64_t rs = (static_cast<std::uint64_t>(s[0]) << 32) | s[1];
            params[static_cast<size_t>(idx)] = run_restart(op, rs, st);
            errs[static_cast<size_t>(idx)] = op.error(params[static_cast<size_t>(idx)].data());
        }
    };
    const int nt = std::max(1, std::min(st.threads, r));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    const size_t best = static_cast<size_t>(std::min_element(errs.begin(), errs.end()) - errs.begin());
    OracleResult out;
    out.restarts_used = r;
    out.restart_errors = errs;
    Povm povm = povm_from_factors(op.factors(params[best].data()));
    const State s = rho;
    out.best_assignment = optimal_values_for_povm(s, x, povm);
    out.best_error =
        weighted_error(approx_error_matrix(s, x, ApproxMeasurement(povm, out.best_assignment)), op.w);
    out.best_povm = std::move(povm);
    return out;
}

}  // namespace obstrade
