#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace obstrade {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Raised for malformed or out-of-domain input. The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical solver cannot certify its answer. CLI exit code 3.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kHermTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;

bool is_hermitian(const CMat& h, double rel_tol = kHermTol);
void require_hermitian(const CMat& h, const std::string& what);

struct EigResult {
    RVec values;   // ascending
    CMat vectors;  // columns are eigenvectors
};

EigResult eig_hermitian(const CMat& h);

// PSD square root with eigenvalues below zero clipped before the root.
CMat psd_sqrt(const CMat& rho);
// Inverse square root of a positive definite real symmetric matrix.
RMat spd_inv_sqrt(const RMat& a);

enum class NormKind { frobenius, trace, spectral };
double matrix_norm(const CMat& m, NormKind kind);

CMat kron(const CMat& a, const CMat& b);
CMat commutator(const CMat& a, const CMat& b);
CMat anticommutator(const CMat& a, const CMat& b);

// Tr(AB) without forming the product.
cplx trace_prod(const CMat& a, const CMat& b);

CMat pauli_x();
CMat pauli_y();
CMat pauli_z();

}  // namespace obstrade
