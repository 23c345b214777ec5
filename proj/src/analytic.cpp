#include "obstrade/analytic.hpp"

#include <algorithm>
#include <cmath>

namespace obstrade {

namespace {

constexpr double kZeroWeight = 1e-14;

double variance(const CVec& phi, const CMat& x) {
    const CVec xv = x * phi;
    const double m = phi.dot(xv).real();
    return std::max(0.0, xv.squaredNorm() - m * m);
}

double variance(const State& rho, const CMat& x) {
    const double m = trace_prod(rho.rho(), x).real();
    return std::max(0.0, trace_prod(rho.rho(), x * x).real() - m * m);
}

void require_weights(double w1, double w2) {
    if (!(w1 > 0.0) || !(w2 > 0.0)) throw ValidationError("pair weights must be positive");
}

void require_pair(const State& rho, const CMat& x1, const CMat& x2) {
    require_hermitian(x1, "X1");
    require_hermitian(x2, "X2");
    if (x1.rows() != rho.dim() || x2.rows() != rho.dim())
        throw ValidationError("observable dimension does not match the state");
}

// S_Re^{-1/2}; a singular S_Re is reported with the observables in its kernel.
RMat inverse_root(const RMat& s_re) {
    Eigen::SelfAdjointEigenSolver<RMat> es(s_re);
    const RVec& v = es.eigenvalues();
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if (v(0) <= 1e-12 * scale) {
        const RVec k = es.eigenvectors().col(0);
        std::string names;
        for (int j = 0; j < k.size(); ++j)
            if (std::abs(k(j)) > 1e-6) names += (names.empty() ? "X" : ", X") + std::to_string(j + 1);
        throw ValidationError("S_Re is singular; observables " + names +
                              " are linearly dependent on the support of the state");
    }
    return es.eigenvectors() * v.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

BoundReport multi_report(const RMat& s_re, const RMat& s_im, const std::string& method) {
    const RMat r = inverse_root(s_re);
    const double norm = (r * s_im * r).norm();
    const double t = std::sqrt(norm + 1.0) - 1.0;
    const double rhs = t * t;
    BoundReport rep;
    rep.method = method;
    rep.value = Eigen::SelfAdjointEigenSolver<RMat>(s_re).eigenvalues()(0) * rhs;
    rep.witness["normalized_norm"] = norm;
    rep.witness["rhs"] = rhs;
    return rep;
}

// Per-vector contribution Im <u|sqrt(rho) X_j X_k sqrt(rho)|u>.
RMat im_term(const State& rho, const ObservableSet& x, const CVec& u) {
    const int n = x.size();
    const CVec v = rho.sqrt_rho() * u;
    std::vector<CVec> xv;
    for (int j = 0; j < n; ++j) xv.push_back(x[j] * v);
    RMat a = RMat::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            a(j, k) = xv[static_cast<size_t>(j)].dot(xv[static_cast<size_t>(k)]).imag();
            a(k, j) = -a(j, k);
        }
    return a;
}

// Pure state |v> with Bloch vector r (unit).
CVec bloch_ket(const RVec& r) {
    const CMat p = 0.5 * (CMat::Identity(2, 2) + r(0) * pauli_x() + r(1) * pauli_y() +
                          r(2) * pauli_z());
    return eig_hermitian(p).vectors.col(1);
}

}  // namespace

double pair_value(double alpha, double beta) {
    return 0.5 * (alpha - std::sqrt(std::max(alpha * alpha - beta * beta, 0.0)));
}

BoundReport bound_multi_analytic(const MomentData& md) {
    return multi_report(md.s_re, md.s_im_tilde, "multi_analytic");
}

BoundReport bound_multi_analytic_search(const State& rho, const ObservableSet& x,
                                        const std::vector<CVec>& basis) {
    BasisChoice bc;
    bc.vectors = basis;
    bc.transpose_flags.assign(basis.size(), false);
    bc.validate(rho.dim());
    const RMat s_re = commutator_moments(rho, x).anti;
    const RMat r = inverse_root(s_re);
    const size_t nq = basis.size();
    std::vector<RMat> t;
    for (const CVec& u : basis) t.push_back(r * im_term(rho, x, u) * r);
    RMat g(nq, nq);
    for (size_t a = 0; a < nq; ++a)
        for (size_t b = 0; b < nq; ++b) g(a, b) = (t[a].array() * t[b].array()).sum();

    // Flipping every flag leaves the norm unchanged, so the first one stays false.
    std::vector<bool> best(nq, false);
    auto score = [&](const std::vector<bool>& f) {
        double s = 0.0;
        for (size_t a = 0; a < nq; ++a)
            for (size_t b = 0; b < nq; ++b) s += (f[a] == f[b] ? 1.0 : -1.0) * g(a, b);
        return s;
    };
    if (nq <= 12) {
        double top = -1.0;
        const unsigned long count = nq == 0 ? 1UL : (1UL << (nq - 1));
        for (unsigned long mask = 0; mask < count; ++mask) {
            std::vector<bool> f(nq, false);
            for (size_t q = 1; q < nq; ++q) f[q] = (mask >> (q - 1)) & 1UL;
            const double s = score(f);
            if (s > top) {
                top = s;
                best = f;
            }
        }
    } else {
        RMat run = t[0];
        for (size_t q = 1; q < nq; ++q) {
            best[q] = (run - t[q]).squaredNorm() > (run + t[q]).squaredNorm();
            run += (best[q] ? -1.0 : 1.0) * t[q];
        }
    }
    bc.transpose_flags = best;
    BoundReport rep = bound_multi_analytic(moment_data(rho, x, bc));
    rep.method = "multi_analytic";
    rep.witness["transpose_flags"] = best;
    rep.witness["flag_search"] = nq <= 12 ? "exhaustive" : "greedy";
    return rep;
}

PairBoundTerms bound_ozawa_pair(const State& rho, const CMat& x1, const CMat& x2, double w1,
                                double w2) {
    require_pair(rho, x1, x2);
    require_weights(w1, w2);
    PairBoundTerms t;
    t.alpha = w1 * variance(rho, x1) + w2 * variance(rho, x2);
    const CMat c = rho.sqrt_rho() * commutator(x1, x2) * rho.sqrt_rho();
    t.beta = std::sqrt(w1 * w2) * matrix_norm(c, NormKind::trace);
    t.value = pair_value(t.alpha, t.beta);
    return t;
}

PairBoundTerms bound_branciard_pair(const State& rho, const CMat& x1, const CMat& x2, double w1,
                                    double w2) {
    require_pair(rho, x1, x2);
    require_weights(w1, w2);
    // Minimizing eps1^2 + eps2^2 along rays eps = r(cos t, sin t) leaves C^2 over the
    // top eigenvalue of [[dX2^2, sqrt(D)], [sqrt(D), dX1^2]], which is the pair form
    // with beta = 2 C.
    PairBoundTerms t;
    t.alpha = w1 * variance(rho, x1) + w2 * variance(rho, x2);
    t.beta = std::sqrt(w1 * w2) * std::abs(trace_prod(rho.rho(), commutator(x1, x2)));
    t.value = pair_value(t.alpha, t.beta);
    return t;
}

PairBoundTerms bound_pure_pair_closed_form(const State& psi, const CMat& x1, const CMat& x2,
                                           double w1, double w2) {
    if (!psi.is_pure()) throw ValidationError("closed form requires a pure state");
    require_pair(psi, x1, x2);
    require_weights(w1, w2);
    const CVec v = psi.pure_vector();
    PairBoundTerms t;
    t.alpha = w1 * variance(v, x1) + w2 * variance(v, x2);
    t.beta = (cplx(0, 1) * std::sqrt(w1 * w2) * v.dot(commutator(x1, x2) * v)).real();
    t.value = pair_value(t.alpha, t.beta);
    if (std::abs(t.beta) > 0.0) {
        const double root = std::sqrt(std::max(t.alpha * t.alpha - t.beta * t.beta, 0.0));
        t.mu_plus = (-(t.alpha - t.beta) + root) / (2.0 * t.beta);
    }
    return t;
}

BasisChoice default_ea_basis(const State& rho, const CMat& x1, const CMat& x2) {
    require_pair(rho, x1, x2);
    const CMat h = cplx(0, 1) * rho.sqrt_rho() * commutator(x1, x2) * rho.sqrt_rho();
    return BasisChoice::from_columns(eig_hermitian(0.5 * (h + h.adjoint())).vectors);
}

BoundReport bound_mixed_pair_EA(const State& rho, const CMat& x1, const CMat& x2, double w1,
                                double w2, const std::optional<BasisChoice>& basis) {
    require_pair(rho, x1, x2);
    require_weights(w1, w2);
    const BasisChoice b = basis ? *basis : default_ea_basis(rho, x1, x2);
    b.validate(rho.dim());
    const CMat c = commutator(x1, x2);
    BoundReport rep;
    rep.method = "EA";
    nlohmann::json terms = nlohmann::json::array();
    for (const CVec& u : b.vectors) {
        const CVec v = rho.sqrt_rho() * u;
        const double lam = v.squaredNorm();
        if (lam < kZeroWeight) continue;
        const CVec phi = v / std::sqrt(lam);
        const double a = w1 * variance(phi, x1) + w2 * variance(phi, x2);
        const double be = (cplx(0, 1) * std::sqrt(w1 * w2) * phi.dot(c * phi)).real();
        rep.value += lam * pair_value(a, be);
        terms.push_back({{"lambda", lam}, {"alpha", a}, {"beta", be}});
    }
    rep.witness["terms"] = terms;
    return rep;
}

QubitBasis qubit_optimal_basis(const State& rho, const ObservableSet& x) {
    if (rho.dim() != 2 || x.dim() != 2) throw ValidationError("qubit_optimal_basis needs d = 2");
    const int n = x.size();
    const CMat paulis[3] = {pauli_x(), pauli_y(), pauli_z()};
    double sw = 0.0;
    RMat sxx = RMat::Zero(3, 3);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            const CMat xjk =
                rho.sqrt_rho() * commutator(x[j], x[k]) * rho.sqrt_rho() / cplx(0, 2);
            const double w = xjk.trace().real();
            RVec v(3);
            for (int r = 0; r < 3; ++r) v(r) = trace_prod(xjk, paulis[r]).real();
            sw += w * w;
            sxx += v * v.transpose();
        }
    Eigen::SelfAdjointEigenSolver<RMat> es(sxx);
    QubitBasis out;
    if (es.eigenvalues()(2) >= sw && es.eigenvalues()(2) > 0.0) {
        const RVec top = es.eigenvectors().col(2);
        out.basis.vectors = {bloch_ket(top), bloch_ket(-top)};
        out.basis.transpose_flags = {false, true};
        out.norm = std::sqrt(es.eigenvalues()(2));
    } else {
        out.basis = BasisChoice::computational(2);
        out.norm = std::sqrt(sw);
    }
    return out;
}

std::string to_string(PairMethod m) {
    switch (m) {
        case PairMethod::ozawa:
            return "Ozawa";
        case PairMethod::branciard:
            return "Branciard";
        case PairMethod::ea:
            return "EA";
    }
    return "?";
}

PairMethod pair_method_from_string(const std::string& s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "ozawa") return PairMethod::ozawa;
    if (l == "branciard") return PairMethod::branciard;
    if (l == "ea") return PairMethod::ea;
    throw ValidationError("unknown pair method '" + s + "'");
}

PairBoundFn pair_bound_fn(PairMethod m) {
    switch (m) {
        case PairMethod::ozawa:
            return [](const State& r, const CMat& a, const CMat& b, double w1, double w2) {
                return bound_ozawa_pair(r, a, b, w1, w2).value;
            };
        case PairMethod::branciard:
            return [](const State& r, const CMat& a, const CMat& b, double w1, double w2) {
                return bound_branciard_pair(r, a, b, w1, w2).value;
            };
        case PairMethod::ea:
            break;
    }
    return [](const State& r, const CMat& a, const CMat& b, double w1, double w2) {
        return bound_mixed_pair_EA(r, a, b, w1, w2).value;
    };
}

BoundReport pairwise_sum_bound(const State& rho, const ObservableSet& x, const RMat& w,
                               PairMethod m) {
    return pairwise_sum_bound(rho, x, w, pair_bound_fn(m), "pairwise_" + to_string(m));
}

BoundReport pairwise_sum_bound(const State& rho, const ObservableSet& x, const RMat& w,
                               const PairBoundFn& pair, const std::string& method) {
    const int n = x.size();
    if (n < 2) throw ValidationError("pairwise sum needs at least two observables");
    validate_weights(w, n);
    if ((w - RMat(w.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("pairwise sum needs a diagonal weight matrix");
    BoundReport rep;
    rep.method = method;
    nlohmann::json pairs = nlohmann::json::array();
    double total = 0.0;
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            const double v = pair(rho, x[j], x[k], w(j, j), w(k, k));
            pairs.push_back({{"j", j}, {"k", k}, {"value", v}});
            total += v;
        }
    rep.value = total / (n - 1);
    rep.witness["pairs"] = pairs;
    return rep;
}

}  // namespace obstrade
