#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "obstrade/linalg.hpp"
#include "test_util.hpp"

using namespace obstrade;

TEST(EigHermitian, IdentityAndPauliZ) {
    EigResult e = eig_hermitian(CMat::Identity(2, 2));
    EXPECT_NEAR(e.values(0), 1.0, 1e-14);
    EXPECT_NEAR(e.values(1), 1.0, 1e-14);
    EigResult z = eig_hermitian(pauli_z());
    EXPECT_NEAR(z.values(0), -1.0, 1e-14);
    EXPECT_NEAR(z.values(1), 1.0, 1e-14);
}

TEST(EigHermitian, MixedQubitAlongX) {
    for (double lam : {0.0, 0.3, 0.9}) {
        const CMat rho = 0.5 * (CMat::Identity(2, 2) + lam * pauli_x());
        EigResult e = eig_hermitian(rho);
        EXPECT_NEAR(e.values(0), (1 - lam) / 2, 1e-14);
        EXPECT_NEAR(e.values(1), (1 + lam) / 2, 1e-14);
    }
}

TEST(EigHermitian, ReconstructsRandomMatrices) {
    std::mt19937_64 rng(7);
    for (int d : {1, 2, 3, 5, 8}) {
        const CMat h = testutil::random_hermitian(d, rng);
        EigResult e = eig_hermitian(h);
        const CMat back = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
        EXPECT_LT((back - h).norm(), 1e-10 * h.norm());
        EXPECT_LT((e.vectors.adjoint() * e.vectors - CMat::Identity(d, d)).norm(), 1e-10);
        for (int i = 1; i < d; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
    }
}

TEST(EigHermitian, RejectsNonHermitian) {
    CMat m(2, 2);
    m << 1, 2, 0, 1;
    EXPECT_THROW(eig_hermitian(m), ValidationError);
}

TEST(PsdSqrt, ProjectorAndMaximallyMixed) {
    CMat p = CMat::Zero(2, 2);
    p(0, 0) = 1;
    EXPECT_LT((psd_sqrt(p) - p).norm(), 1e-14);
    EXPECT_LT((psd_sqrt(0.5 * CMat::Identity(2, 2)) - CMat::Identity(2, 2) / std::sqrt(2.0)).norm(),
              1e-14);
}

TEST(PsdSqrt, QubitClosedForm) {
    for (double lam : {0.1, 0.5, 0.99}) {
        const CMat rho = 0.5 * (CMat::Identity(2, 2) + lam * pauli_x());
        const double a = std::sqrt((1 + lam) / 2), b = std::sqrt((1 - lam) / 2);
        const CMat expect = 0.5 * ((a + b) * CMat::Identity(2, 2) + (a - b) * pauli_x());
        EXPECT_LT((psd_sqrt(rho) - expect).norm(), 1e-12);
    }
}

TEST(PsdSqrt, ClipsTinyNegativeEigenvalues) {
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -1e-13;
    const CMat r = psd_sqrt(m);
    EXPECT_NEAR(r(1, 1).real(), 0.0, 1e-15);
    EXPECT_LT((r * r - m).norm(), 1e-9);
}

TEST(MatrixNorm, Kinds) {
    EXPECT_NEAR(matrix_norm(CMat::Identity(3, 3), NormKind::frobenius), std::sqrt(3.0), 1e-14);
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = -2;
    EXPECT_NEAR(matrix_norm(d, NormKind::trace), 3.0, 1e-14);
    EXPECT_NEAR(matrix_norm(d, NormKind::spectral), 2.0, 1e-14);
}

TEST(Kron, Basics) {
    EXPECT_LT((kron(CMat::Identity(2, 2), CMat::Identity(2, 2)) - CMat::Identity(4, 4)).norm(), 0.0 + 1e-15);
    const CMat zi = kron(pauli_z(), CMat::Identity(2, 2));
    RVec expect(4);
    expect << 1, 1, -1, -1;
    EXPECT_LT((zi - expect.cast<cplx>().asDiagonal().toDenseMatrix()).norm(), 1e-15);
    std::mt19937_64 rng(3);
    const CMat rho = testutil::random_density(3, rng, 3);
    EXPECT_NEAR(kron(rho, rho).trace().real(), 1.0, 1e-12);
}
