#include "obstrade/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace obstrade {

bool is_hermitian(const CMat& h, double rel_tol) {
    if (h.rows() != h.cols()) return false;
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    return (h - h.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void require_hermitian(const CMat& h, const std::string& what) {
    if (h.rows() != h.cols())
        throw ValidationError(what + ": matrix is not square");
    if (!h.allFinite()) throw ValidationError(what + ": non-finite entries");
    if (!is_hermitian(h))
        throw ValidationError(what + ": matrix is not Hermitian");
}

EigResult eig_hermitian(const CMat& h) {
    require_hermitian(h, "eig_hermitian");
    // Symmetrize to remove the roundoff-level anti-Hermitian part.
    const CMat hs = 0.5 * (h + h.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(hs);
    if (es.info() != Eigen::Success) throw SolverError("eig_hermitian: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

CMat psd_sqrt(const CMat& rho) {
    EigResult e = eig_hermitian(rho);
    RVec s = e.values.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; });
    return e.vectors * s.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

RMat spd_inv_sqrt(const RMat& a) {
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (a + a.transpose()));
    const RVec& v = es.eigenvalues();
    if (v.size() == 0 || v.minCoeff() <= 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()))
        throw ValidationError("matrix is singular or not positive definite");
    RVec s = v.unaryExpr([](double x) { return 1.0 / std::sqrt(x); });
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

double matrix_norm(const CMat& m, NormKind kind) {
    switch (kind) {
        case NormKind::frobenius:
            return m.norm();
        case NormKind::trace: {
            Eigen::JacobiSVD<CMat> svd(m);
            return svd.singularValues().sum();
        }
        case NormKind::spectral: {
            if (m.size() == 0) return 0.0;
            Eigen::JacobiSVD<CMat> svd(m);
            return svd.singularValues()(0);
        }
    }
    return 0.0;
}

CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMat commutator(const CMat& a, const CMat& b) { return a * b - b * a; }
CMat anticommutator(const CMat& a, const CMat& b) { return a * b + b * a; }

cplx trace_prod(const CMat& a, const CMat& b) {
    return (a.array() * b.transpose().array()).sum();
}

CMat pauli_x() {
    CMat m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

CMat pauli_y() {
    CMat m(2, 2);
    m << 0, cplx(0, -1), cplx(0, 1), 0;
    return m;
}

CMat pauli_z() {
    CMat m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

}  // namespace obstrade
