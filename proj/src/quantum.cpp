#include "obstrade/quantum.hpp"

#include <algorithm>
#include <cmath>

namespace obstrade {

namespace {

constexpr double kZeroProb = 1e-14;

void require_dim(int got, int want, const char* what) {
    if (got != want)
        throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(got) +
                              " vs " + std::to_string(want) + ")");
}

}  // namespace

State::State(CMat rho) : rho_(std::move(rho)) {
    require_hermitian(rho_, "state");
    if (rho_.rows() == 0) throw ValidationError("state: empty matrix");
    const cplx tr = rho_.trace();
    if (std::abs(tr - 1.0) > 1e-10) throw ValidationError("state: trace differs from 1");
    rho_ = 0.5 * (rho_ + rho_.adjoint().eval());
    EigResult e = eig_hermitian(rho_);
    if (e.values(0) < -kPsdTol) throw ValidationError("state: negative eigenvalue");
    evals_ = e.values;
    evecs_ = e.vectors;
    RVec s = evals_.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; });
    sqrt_rho_ = evecs_ * s.cast<cplx>().asDiagonal() * evecs_.adjoint();
}

State State::pure(const CVec& psi) {
    const double nrm = psi.norm();
    if (!(nrm > 0.0)) throw ValidationError("pure state: zero vector");
    CVec v = psi / nrm;
    return State(v * v.adjoint());
}

bool State::is_pure() const {
    return evals_.size() < 2 || evals_(evals_.size() - 2) < 1e-10;
}

CVec State::pure_vector() const {
    CVec v = evecs_.col(evecs_.cols() - 1);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::conj(v(imax)) / std::abs(v(imax));
    return v;
}

ObservableSet::ObservableSet(std::vector<CMat> ops, bool check_independence)
    : ops_(std::move(ops)) {
    if (ops_.empty()) throw ValidationError("observable set is empty");
    const Eigen::Index d = ops_[0].rows();
    for (size_t j = 0; j < ops_.size(); ++j) {
        require_hermitian(ops_[j], "observable " + std::to_string(j + 1));
        if (ops_[j].rows() != d) throw ValidationError("observables do not share a dimension");
        ops_[j] = 0.5 * (ops_[j] + ops_[j].adjoint().eval());
    }
    if (!check_independence) return;
    // Real embedding: each observable becomes a vector of length 2 d^2.
    RMat emb(static_cast<Eigen::Index>(ops_.size()), 2 * d * d);
    for (size_t j = 0; j < ops_.size(); ++j) {
        const Eigen::Index row = static_cast<Eigen::Index>(j);
        for (Eigen::Index a = 0; a < d * d; ++a) {
            emb(row, a) = ops_[j].data()[a].real();
            emb(row, d * d + a) = ops_[j].data()[a].imag();
        }
    }
    Eigen::JacobiSVD<RMat> svd(emb);
    const RVec& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-8 * sv(0))
        throw ValidationError("observables are linearly dependent");
}

ObservableSet ObservableSet::subset(const std::vector<int>& idx) const {
    std::vector<CMat> out;
    for (int j : idx) {
        if (j < 0 || j >= size()) throw ValidationError("observable index out of range");
        out.push_back(ops_[static_cast<size_t>(j)]);
    }
    return ObservableSet(std::move(out));
}

ObservableSet ObservableSet::recombine(const RMat& b) const {
    if (b.cols() != size()) throw ValidationError("recombination matrix has wrong shape");
    std::vector<CMat> out;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        CMat y = CMat::Zero(dim(), dim());
        for (int k = 0; k < size(); ++k) y += b(j, k) * ops_[static_cast<size_t>(k)];
        out.push_back(y);
    }
    return ObservableSet(std::move(out));
}

Povm::Povm(std::vector<CMat> outcomes, std::vector<std::string> labels)
    : outcomes_(std::move(outcomes)), labels_(std::move(labels)) {
    if (outcomes_.empty()) throw ValidationError("POVM has no outcomes");
    const Eigen::Index d = outcomes_[0].rows();
    CMat sum = CMat::Zero(d, d);
    for (size_t m = 0; m < outcomes_.size(); ++m) {
        require_hermitian(outcomes_[m], "POVM element " + std::to_string(m));
        if (outcomes_[m].rows() != d) throw ValidationError("POVM elements differ in dimension");
        outcomes_[m] = 0.5 * (outcomes_[m] + outcomes_[m].adjoint().eval());
        if (eig_hermitian(outcomes_[m]).values(0) < -kPsdTol)
            throw ValidationError("POVM element " + std::to_string(m) + " is not PSD");
        sum += outcomes_[m];
    }
    if ((sum - CMat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("POVM elements do not sum to identity");
    if (labels_.empty())
        for (size_t m = 0; m < outcomes_.size(); ++m) labels_.push_back(std::to_string(m));
    if (labels_.size() != outcomes_.size()) throw ValidationError("POVM label count mismatch");
}

RVec Povm::probabilities(const State& s) const {
    require_dim(s.dim(), dim(), "povm probabilities");
    RVec p(size());
    for (int m = 0; m < size(); ++m) p(m) = trace_prod(s.rho(), (*this)[m]).real();
    return p;
}

Povm povm_from_factors(const std::vector<CMat>& a) {
    if (a.empty()) throw ValidationError("povm_from_factors: no factors");
    const Eigen::Index d = a[0].cols();
    CMat n = CMat::Zero(d, d);
    std::vector<CMat> g;
    for (const CMat& am : a) {
        g.push_back(am.adjoint() * am);
        n += g.back();
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (n + n.adjoint()));
    const RVec& ev = es.eigenvalues();
    if (ev(0) <= 1e-14 * std::max(1.0, ev(ev.size() - 1)))
        throw ValidationError("povm_from_factors: factors do not span the space");
    const CMat ninv = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() *
                      es.eigenvectors().adjoint();
    std::vector<CMat> out;
    CMat sum = CMat::Zero(d, d);
    for (const CMat& gm : g) {
        CMat m = ninv * gm * ninv;
        m = 0.5 * (m + m.adjoint().eval());
        out.push_back(m);
        sum += m;
    }
    // Absorb the roundoff in the last element so the completeness check passes.
    out.back() += CMat::Identity(d, d) - sum;
    return Povm(std::move(out));
}

ApproxMeasurement::ApproxMeasurement(Povm p, RMat v) : povm(std::move(p)), values(std::move(v)) {
    if (values.cols() != povm.size())
        throw ValidationError("value assignment column count differs from outcome count");
    if (!values.allFinite()) throw ValidationError("value assignment has non-finite entries");
}

void validate_weights(const RMat& w, int n) {
    if (w.rows() != n || w.cols() != n) throw ValidationError("weight matrix has wrong shape");
    const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > kHermTol * scale)
        throw ValidationError("weight matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<RMat> es(w);
    if (es.eigenvalues()(0) < -kPsdTol) throw ValidationError("weight matrix is not PSD");
}

BasisChoice BasisChoice::computational(int d) {
    return from_columns(CMat::Identity(d, d));
}

BasisChoice BasisChoice::from_columns(const CMat& u) {
    BasisChoice b;
    for (Eigen::Index q = 0; q < u.cols(); ++q) b.vectors.push_back(u.col(q));
    b.transpose_flags.assign(b.vectors.size(), false);
    return b;
}

void BasisChoice::validate(int d) const {
    if (transpose_flags.size() != vectors.size())
        throw ValidationError("basis: flag count differs from vector count");
    CMat sum = CMat::Zero(d, d);
    for (const CVec& v : vectors) {
        if (v.size() != d) throw ValidationError("basis: vector dimension mismatch");
        sum += v * v.adjoint();
    }
    if ((sum - CMat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("basis is incomplete: sum of projectors differs from identity");
}

CMat MomentData::s_tilde() const {
    CMat s(s_re.rows(), s_re.cols());
    s.real() = s_re;
    s.imag() = s_im_tilde;
    return s;
}

CommutatorMoments commutator_moments(const State& rho, const ObservableSet& x) {
    require_dim(x.dim(), rho.dim(), "commutator_moments");
    const int n = x.size();
    CommutatorMoments out{RMat::Zero(n, n), RMat::Zero(n, n)};
    for (int j = 0; j < n; ++j) {
        for (int k = j; k < n; ++k) {
            const cplx t = trace_prod(rho.rho(), x[j] * x[k]);
            // Tr(rho X_j X_k) = anti + i comm with the symmetric/antisymmetric split.
            out.anti(j, k) = out.anti(k, j) = t.real();
            out.comm(j, k) = t.imag();
            out.comm(k, j) = -t.imag();
        }
    }
    out.comm.diagonal().setZero();
    return out;
}

CMat approx_error_matrix(const State& rho, const ObservableSet& x, const ApproxMeasurement& am) {
    require_dim(x.dim(), rho.dim(), "approx_error_matrix");
    require_dim(am.povm.dim(), rho.dim(), "approx_error_matrix");
    if (am.values.rows() != x.size())
        throw ValidationError("approx_error_matrix: value rows differ from observable count");
    const int n = x.size();
    const int k = am.povm.size();
    const RVec p = am.povm.probabilities(rho);
    std::vector<CMat> r(static_cast<size_t>(n), CMat::Zero(rho.dim(), rho.dim()));
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < k; ++m) r[static_cast<size_t>(j)] += am.values(j, m) * am.povm[m];
    CMat q(n, n);
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            double ff = 0.0;
            for (int m = 0; m < k; ++m) ff += am.values(j, m) * am.values(l, m) * p(m);
            const CMat& rj = r[static_cast<size_t>(j)];
            const CMat& rl = r[static_cast<size_t>(l)];
            q(j, l) = ff - trace_prod(rho.rho(), rj * x[l]) - trace_prod(rho.rho(), x[j] * rl) +
                      trace_prod(rho.rho(), x[j] * x[l]);
        }
    }
    return q;
}

double weighted_error(const CMat& q, const RMat& w) {
    if (q.rows() != w.rows() || q.cols() != w.cols())
        throw ValidationError("weighted_error: dimension mismatch");
    return (w.array() * q.real().transpose().array()).sum();
}

RMat optimal_values_for_povm(const State& rho, const ObservableSet& x, const Povm& povm) {
    require_dim(x.dim(), rho.dim(), "optimal_values_for_povm");
    const RVec p = povm.probabilities(rho);
    RMat f = RMat::Zero(x.size(), povm.size());
    for (int m = 0; m < povm.size(); ++m) {
        if (p(m) < kZeroProb) continue;
        const CMat rm = rho.rho() * povm[m];
        for (int j = 0; j < x.size(); ++j) f(j, m) = trace_prod(rm, x[j]).real() / p(m);
    }
    return f;
}

MomentData moment_data(const State& rho, const ObservableSet& x, const BasisChoice& basis) {
    require_dim(x.dim(), rho.dim(), "moment_data");
    basis.validate(rho.dim());
    const int n = x.size();
    MomentData md;
    md.s_re = commutator_moments(rho, x).anti;
    md.s_im_tilde = RMat::Zero(n, n);
    md.lambdas = RVec::Zero(static_cast<Eigen::Index>(basis.vectors.size()));
    const CMat& sr = rho.sqrt_rho();
    std::vector<CVec> xv(static_cast<size_t>(n));
    for (size_t q = 0; q < basis.vectors.size(); ++q) {
        const CVec v = sr * basis.vectors[q];  // sqrt(rho)|u>
        const double lam = std::max(0.0, v.squaredNorm());
        md.lambdas(static_cast<Eigen::Index>(q)) = lam;
        md.phis.push_back(lam < kZeroProb ? CVec() : CVec(v / std::sqrt(lam)));
        for (int j = 0; j < n; ++j) xv[static_cast<size_t>(j)] = x[j] * v;
        const double sign = basis.transpose_flags[q] ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                // Im <u|sqrt(rho) X_j X_k sqrt(rho)|u>.
                const double im =
                    xv[static_cast<size_t>(j)].dot(xv[static_cast<size_t>(k)]).imag();
                md.s_im_tilde(j, k) += sign * im;
                md.s_im_tilde(k, j) -= sign * im;
            }
    }
    return md;
}

CMat moment_block(const State& rho, const ObservableSet& x, const ApproxMeasurement& am,
                  const CVec& u) {
    const int n = x.size();
    const CVec phi = rho.sqrt_rho() * u;
    std::vector<CVec> xv, rv;
    for (int j = 0; j < n; ++j) {
        xv.push_back(x[j] * phi);
        CMat r = CMat::Zero(rho.dim(), rho.dim());
        for (int m = 0; m < am.povm.size(); ++m) r += am.values(j, m) * am.povm[m];
        rv.push_back(r * phi);
    }
    RVec pm(am.povm.size());
    for (int m = 0; m < am.povm.size(); ++m) pm(m) = phi.dot(am.povm[m] * phi).real();
    CMat a(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            double ff = 0.0;
            for (int m = 0; m < am.povm.size(); ++m) ff += am.values(j, m) * am.values(k, m) * pm(m);
            const cplx s = xv[j].dot(xv[k]);
            const cplx rx = rv[j].dot(xv[k]);   // <phi|R_j X_k|phi>
            const cplx xr = xv[j].dot(rv[k]);   // <phi|X_j R_k|phi>
            a(j, k) = ff - rx - xr + s;
            a(j, n + k) = rx - s;
            a(n + j, n + k) = s;
        }
    }
    a.bottomLeftCorner(n, n) = a.topRightCorner(n, n).adjoint();
    return a;
}

CMat assembled_moment_matrix(const State& rho, const ObservableSet& x,
                             const ApproxMeasurement& am, const BasisChoice& basis) {
    basis.validate(rho.dim());
    const int n = x.size();
    CMat sum = CMat::Zero(2 * n, 2 * n);
    for (size_t q = 0; q < basis.vectors.size(); ++q) {
        const CMat a = moment_block(rho, x, am, basis.vectors[q]);
        sum += basis.transpose_flags[q] ? CMat(a.conjugate()) : a;
    }
    return sum;
}

}  // namespace obstrade
