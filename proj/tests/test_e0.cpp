#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "obstrade/analytic.hpp"
#include "obstrade/e0.hpp"
#include "obstrade/instances.hpp"
#include "test_util.hpp"

using namespace obstrade;

namespace {

ObservableSet random_set(int d, int n, std::mt19937_64& rng) {
    std::vector<CMat> ops;
    for (int j = 0; j < n; ++j) ops.push_back(testutil::random_hermitian(d, rng));
    return ObservableSet(ops);
}

void expect_witness_invariants(const E0Witness& w) {
    const int n = static_cast<int>(w.r_ops.size());
    for (int j = 0; j < n; ++j) {
        EXPECT_TRUE(is_hermitian(w.r_ops[static_cast<size_t>(j)], 1e-12));
        for (int k = 0; k < n; ++k) {
            const CMat& s = w.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(k)];
            EXPECT_TRUE(is_hermitian(s, 1e-10));
            EXPECT_LT((s - w.s_blocks[static_cast<size_t>(k)][static_cast<size_t>(j)]).norm(), 1e-10);
        }
    }
    EXPECT_GE(witness_psd_margin(w), -1e-7);
}

}  // namespace

TEST(BuildE0, StructuralCounts) {
    const State psi = State::pure(instances::rotated_qubit(0.3));
    const E0Model m = build_e0_model(psi, instances::half_paulis(), RMat::Identity(3, 3));
    EXPECT_EQ(m.problem.block(m.block).dim, 8);
    EXPECT_EQ(m.problem.num_variables(), 3 * 4 + 6 * 4);

    std::mt19937_64 rng(1);
    const State rho(testutil::random_density(8, rng, 8));
    const E0Model big = build_e0_model(rho, random_set(8, 10, rng), RMat::Identity(10, 10));
    EXPECT_EQ(big.problem.block(big.block).dim, 88);
    EXPECT_EQ(big.problem.num_variables(), 10 * 64 + 55 * 64);
    EXPECT_THROW(build_e0_model(rho, instances::half_paulis(), {}), ValidationError);
}

TEST(BoundE0, SingleObservableIsExact) {
    std::mt19937_64 rng(2);
    for (int d : {2, 3}) {
        const State rho(testutil::random_density(d, rng, d));
        const ObservableSet x({testutil::random_hermitian(d, rng)});
        const E0Witness w = bound_e0(rho, x);
        EXPECT_EQ(w.status, sdp::Status::optimal);
        EXPECT_NEAR(w.value, 0.0, 1e-7);
    }
}

TEST(BoundE0, CommutingObservablesGiveZero) {
    std::mt19937_64 rng(3);
    const CMat u = testutil::random_unitary(3, rng);
    std::vector<CMat> ops;
    for (int j = 0; j < 3; ++j) {
        RVec dg = RVec::Zero(3);
        dg(j) = 1.0 + j;
        ops.push_back(u * dg.cast<cplx>().asDiagonal() * u.adjoint());
    }
    const ObservableSet x(ops);
    for (const State& rho : {State(testutil::random_density(3, rng, 3)),
                             State::pure(testutil::random_ket(3, rng))}) {
        const E0Witness w = bound_e0(rho, x);
        EXPECT_EQ(w.status, sdp::Status::optimal);
        EXPECT_NEAR(w.value, 0.0, 1e-7);
    }
}

TEST(BoundE0, MatchesPureClosedForm) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const int d = 2 + t % 3;
        const State psi = State::pure(testutil::random_ket(d, rng));
        const CMat a = testutil::random_hermitian(d, rng), b = testutil::random_hermitian(d, rng);
        const E0Witness w = bound_e0(psi, ObservableSet({a, b}));
        ASSERT_EQ(w.status, sdp::Status::optimal) << t;
        EXPECT_NEAR(w.value, bound_pure_pair_closed_form(psi, a, b).value, 1e-6) << t;
        expect_witness_invariants(w);
    }
}

TEST(BoundE0, WeightedPureClosedForm) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> wd(0.2, 2.0);
    for (int t = 0; t < 20; ++t) {
        const State psi = State::pure(testutil::random_ket(3, rng));
        const CMat a = testutil::random_hermitian(3, rng), b = testutil::random_hermitian(3, rng);
        const double w1 = wd(rng), w2 = wd(rng);
        RMat w = RMat::Zero(2, 2);
        w(0, 0) = w1;
        w(1, 1) = w2;
        const E0Witness e = bound_e0(psi, ObservableSet({a, b}), w);
        EXPECT_NEAR(e.value, bound_pure_pair_closed_form(psi, a, b, w1, w2).value, 1e-6);
    }
}

TEST(BoundE0, WitnessInvariantsOnMixedStates) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const int d = 2 + t % 3;
        const E0Witness w = bound_e0(State(testutil::random_density(d, rng, d)), random_set(d, 3, rng));
        ASSERT_EQ(w.status, sdp::Status::optimal);
        expect_witness_invariants(w);
        EXPECT_LE(w.dual_value, w.value + 1e-9);
    }
}

TEST(BoundE0, WitnessReproducesObjective) {
    // Tr[(W (x) rho)(S - R X - X R + X X)] evaluated from the returned blocks.
    std::mt19937_64 rng(7);
    const State rho(testutil::random_density(3, rng, 2));
    const ObservableSet x = random_set(3, 3, rng);
    const E0Witness w = bound_e0(rho, x);
    double obj = 0.0;
    for (int j = 0; j < 3; ++j) {
        const CMat& s = w.s_blocks[static_cast<size_t>(j)][static_cast<size_t>(j)];
        const CMat& r = w.r_ops[static_cast<size_t>(j)];
        obj += trace_prod(rho.rho(), s - r * x[j] - x[j] * r + x[j] * x[j]).real();
    }
    EXPECT_NEAR(obj, w.value, 1e-9);
}

TEST(BoundE0, Spin1AboveHalfEASum) {
    for (int i = 1; i < 20; ++i) {
        const double p = 0.05 * i;
        const State rho = instances::spin1_state(p);
        const ObservableSet x = instances::spin1_observables();
        const E0Witness w = bound_e0(rho, x);
        ASSERT_EQ(w.status, sdp::Status::optimal) << p;
        const double ea = pairwise_sum_bound(rho, x, RMat::Identity(3, 3), PairMethod::ea).value;
        EXPECT_GE(w.value, ea - 1e-7) << p;
    }
}

TEST(BoundE0, AboveSummedPairs) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 8; ++t) {
        const int d = 2 + t % 2, n = 3;
        const State rho(testutil::random_density(d, rng, d));
        const ObservableSet x = random_set(d, n, rng);
        double pairs = 0.0;
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) pairs += bound_e0(rho, x.subset({j, k})).value;
        EXPECT_GE(bound_e0(rho, x).value, pairs / (n - 1) - 1e-7);
    }
}

TEST(BoundE0, AboveMultiAnalyticForAnyBasis) {
    std::mt19937_64 rng(9);
    std::bernoulli_distribution coin(0.5);
    for (int t = 0; t < 10; ++t) {
        const int d = 2 + t % 3;
        const State rho(testutil::random_density(d, rng, d));
        const ObservableSet x = random_set(d, 3, rng);
        const double e0 = bound_e0(rho, x).value;
        for (int b = 0; b < 4; ++b) {
            BasisChoice basis = BasisChoice::from_columns(testutil::random_unitary(d, rng));
            for (size_t q = 0; q < basis.transpose_flags.size(); ++q) basis.transpose_flags[q] = coin(rng);
            EXPECT_GE(e0, bound_multi_analytic(moment_data(rho, x, basis)).value - 1e-7);
        }
    }
}

TEST(BoundE0, MonotoneInWeights) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    for (int t = 0; t < 6; ++t) {
        const State rho(testutil::random_density(3, rng, 3));
        const ObservableSet x = random_set(3, 3, rng);
        RMat a(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = g(rng);
        const RMat w = a * a.transpose() + 0.1 * RMat::Identity(3, 3);
        const RVec v = RVec::Random(3);
        const RMat smaller = w - 0.5 * (v * v.transpose()) / v.dot(w.inverse() * v);
        EXPECT_LE(bound_e0(rho, x, smaller).value, bound_e0(rho, x, w).value + 1e-7);
    }
}

TEST(OptimalPovm, PureQubitPair) {
    const State psi = State::pure(CVec::Unit(2, 0).cast<cplx>());
    const ObservableSet x({0.5 * pauli_x(), 0.5 * pauli_y()});
    const OptimalMeasurement m = optimal_povm_pure(psi, x, RMat::Identity(2, 2));
    EXPECT_NEAR(m.achieved, 0.25, 1e-6);
    const OptimalMeasurement two = optimal_povm_pure_two(psi, x[0], x[1]);
    EXPECT_NEAR(two.achieved, 0.25, 1e-6);
}

TEST(OptimalPovm, ReproducesRVectorsAndE0) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const int d = 2 + t % 4, n = 2 + t % 3;
        const State psi = State::pure(testutil::random_ket(d, rng));
        const ObservableSet x = random_set(d, n, rng);
        const RMat w = RMat::Identity(n, n);
        const E0Witness wit = bound_e0(psi, x, w);
        const OptimalMeasurement m = optimal_povm_pure(psi, x, w, wit);
        EXPECT_NEAR(m.achieved, wit.value, 1e-6) << t;
        EXPECT_LE(m.measurement.povm.size(), n + 2);
        const CVec v = psi.pure_vector();
        for (int j = 0; j < n; ++j) {
            CVec act = CVec::Zero(d);
            for (int k = 0; k < m.measurement.povm.size(); ++k)
                act += m.measurement.values(j, k) * (m.measurement.povm[k] * v);
            EXPECT_LT((act - m.r_vectors[static_cast<size_t>(j)]).norm(), 1e-8);
        }
        // Direct evaluation agrees with the reported figure.
        EXPECT_NEAR(weighted_error(approx_error_matrix(psi, x, m.measurement), w), m.achieved, 1e-10);
    }
}

TEST(OptimalPovm, PauliTripleAtQuarterPi) {
    const State psi = State::pure(instances::rotated_qubit(M_PI / 4));
    const E0Witness w = bound_e0(psi, instances::half_paulis());
    ASSERT_EQ(w.status, sdp::Status::optimal);
    const OptimalMeasurement m = optimal_povm_pure(psi, instances::half_paulis(), RMat::Identity(3, 3), w);
    EXPECT_NEAR(m.achieved, w.value, 1e-6);
}

TEST(OptimalPovm, SingleDiagonalObservableIsExact) {
    std::mt19937_64 rng(12);
    const State psi = State::pure(testutil::random_ket(3, rng));
    const ObservableSet x({RVec::LinSpaced(3, -1, 1).cast<cplx>().asDiagonal().toDenseMatrix()});
    const OptimalMeasurement m = optimal_povm_pure(psi, x, RMat::Identity(1, 1));
    EXPECT_NEAR(m.achieved, 0.0, 1e-8);
}

TEST(OptimalPovm, RejectsMixedState) {
    EXPECT_THROW(optimal_povm_pure(instances::diagonal_qubit(0.3), instances::half_paulis(), {}),
                 ValidationError);
    EXPECT_THROW(optimal_povm_pure_two(instances::diagonal_qubit(0.3), pauli_x(), pauli_y()),
                 ValidationError);
}

TEST(OptimalPovm, TwoObservableAgreesWithGeneral) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 50; ++t) {
        const int d = 2 + t % 3;
        const State psi = State::pure(testutil::random_ket(d, rng));
        const CMat a = testutil::random_hermitian(d, rng), b = testutil::random_hermitian(d, rng);
        const OptimalMeasurement two = optimal_povm_pure_two(psi, a, b);
        const OptimalMeasurement gen = optimal_povm_pure(psi, ObservableSet({a, b}), RMat::Identity(2, 2));
        EXPECT_NEAR(two.achieved, gen.achieved, 1e-6) << t;
        EXPECT_NEAR(two.achieved, bound_pure_pair_closed_form(psi, a, b).value, 1e-6) << t;
    }
}

TEST(OptimalPovm, TwoObservableEigenstate) {
    const State psi = State::pure(CVec::Unit(2, 0).cast<cplx>());
    const OptimalMeasurement m = optimal_povm_pure_two(psi, 0.5 * pauli_z(), 0.5 * pauli_x());
    EXPECT_NEAR(m.achieved, 0.0, 1e-9);
}

TEST(Frame, DctMatrixIsOrthogonalWithPositiveFirstColumn) {
    for (int n : {1, 2, 3, 5, 8}) {
        const RMat p = dct_matrix(n);
        EXPECT_LT((p.transpose() * p - RMat::Identity(n, n)).norm(), 1e-12);
        EXPECT_GT(p.col(0).minCoeff(), 0.0);
    }
}

TEST(Oracle, CommutingGivesZero) {
    const ObservableSet x({pauli_z(), 0.5 * pauli_z()}, false);
    OracleSettings os;
    os.restarts = 4;
    const OracleResult r = brute_force_min_error(instances::diagonal_qubit(0.3), x, RMat::Identity(2, 2), os);
    EXPECT_NEAR(r.best_error, 0.0, 1e-6);
}

TEST(Oracle, PureQubitMatchesE0) {
    const State psi = State::pure(instances::rotated_qubit(0.7));
    const ObservableSet x({0.5 * pauli_x(), 0.5 * pauli_y()});
    OracleSettings os;
    os.restarts = 8;
    const OracleResult r = brute_force_min_error(psi, x, RMat::Identity(2, 2), os);
    const double e0 = bound_e0(psi, x).value;
    EXPECT_NEAR(r.best_error, e0, 1e-4);
    EXPECT_GE(r.best_error, e0 - 1e-6);
    ASSERT_TRUE(r.best_povm.has_value());
    EXPECT_EQ(r.best_povm->size(), 4);
}

TEST(Oracle, NeverBelowE0AndDeterministic) {
    std::mt19937_64 rng(14);
    OracleSettings os;
    os.restarts = 4;
    os.seed = 99;
    for (int t = 0; t < 4; ++t) {
        const State rho(testutil::random_density(2 + t % 2, rng, 2));
        const ObservableSet x = random_set(2 + t % 2, 2, rng);
        const OracleResult a = brute_force_min_error(rho, x, RMat::Identity(2, 2), os);
        EXPECT_GE(a.best_error, bound_e0(rho, x).value - 1e-6);
        const OracleResult b = brute_force_min_error(rho, x, RMat::Identity(2, 2), os);
        EXPECT_EQ(a.best_error, b.best_error);
        EXPECT_EQ(a.restarts_used, 4);
    }
}

TEST(Oracle, Gap4InstanceExceedsE0) {
    const double p = 0.5;
    const State rho = instances::gap4_state(p);
    const ObservableSet x = instances::gap4_observables();
    const RMat w = RMat::Identity(x.size(), x.size());
    OracleSettings os;
    os.restarts = 8;
    const OracleResult r = brute_force_min_error(rho, x, w, os);
    const double e0 = bound_e0(rho, x, w).value;
    EXPECT_GT(r.best_error, e0 + 1e-4);
}
