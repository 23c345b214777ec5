#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

#include "obstrade/metrology.hpp"
#include "test_util.hpp"

using namespace obstrade;
using std::numbers::pi;

namespace {

RVec vec(std::initializer_list<double> v) {
    RVec x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double a : v) x(i++) = a;
    return x;
}

RVec all_quarter_pi(int n) { return RVec::Constant(n, pi / 4); }

double analytic_from_norm(int n, double norm) {
    const double t = std::sqrt(norm + 1.0) - 1.0;
    return n - t * t;
}

// Pure-state QFI from kets alone: 4 Re(<d_j psi|d_k psi> - <d_j psi|psi><psi|d_k psi>).
RMat pure_qfi_oracle(const std::function<CVec(const RVec&)>& ket, const RVec& x) {
    const int n = static_cast<int>(x.size());
    const double h = 1e-5;
    const CVec psi = ket(x);
    std::vector<CVec> d;
    for (int j = 0; j < n; ++j) {
        RVec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        d.push_back((ket(xp) - ket(xm)) / (2 * h));
    }
    RMat f(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const cplx v = d[j].dot(d[k]) - d[j].dot(psi) * psi.dot(d[k]);
            f(j, k) = 4 * v.real();
        }
    return f;
}

// Written directly from the amplitudes, independent of the library's monomial table.
CVec three_qubit_oracle(const RVec& x) {
    const double t0 = x(0), t1 = x(1), t2 = x(2), t3 = x(3), t4 = x(4);
    const double p0 = x(5), p1 = x(6), p2 = x(7), p3 = x(8), p4 = x(9);
    auto e = [](double a) { return std::exp(cplx(0, a)); };
    CVec psi1 = CVec::Zero(8), psi2 = CVec::Zero(8);
    psi1(1) = std::sin(t1) * std::sin(t2);
    psi1(2) = std::sin(t1) * std::cos(t2) * e(p1);
    psi1(4) = std::cos(t1) * e(p2);
    psi2(6) = std::sin(t3) * std::sin(t4);
    psi2(5) = std::sin(t3) * std::cos(t4) * e(p3);
    psi2(3) = std::cos(t3) * e(p4);
    return std::sin(t0) * psi1 + std::cos(t0) * e(p0) * psi2;
}

}  // namespace

TEST(Sld, SatisfiesDefiningEquationFullRank) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const State rho(testutil::random_density(3, rng, 3));
        CMat d = testutil::random_hermitian(3, rng);
        d -= (d.trace() / 3.0) * CMat::Identity(3, 3);
        const CMat l = sld(rho, d);
        EXPECT_TRUE(is_hermitian(l));
        EXPECT_LT((0.5 * (rho.rho() * l + l * rho.rho()) - d).norm(), 1e-9);
    }
}

TEST(Sld, PureStateDerivative) {
    std::mt19937_64 rng(12);
    const CVec psi = testutil::random_ket(4, rng);
    const CVec dpsi = testutil::random_complex(4, 1, rng);
    // Keep the tangent normalized: Re<psi|dpsi> = 0.
    const CVec t = dpsi - cplx(psi.dot(dpsi).real(), 0) * psi;
    const CMat d = t * psi.adjoint() + psi * t.adjoint();
    const CMat l = sld(State::pure(psi), d);
    EXPECT_LT((l - 2 * d).norm(), 1e-9);
}

TEST(Sld, RejectsKernelWeight) {
    CMat rho = CMat::Zero(2, 2);
    rho(0, 0) = 1.0;
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = -1.0;
    d(1, 1) = 1.0;
    EXPECT_THROW(sld(State(rho), d), ValidationError);
}

TEST(Qfi, QubitBlochClosedForm) {
    const ParamFamily f = families::qubit_bloch();
    for (double lam : {0.2, 0.5, 0.9})
        for (double th : {0.4, pi / 2, 2.0}) {
            const RVec x = vec({lam, th, 0.7});
            const RMat fq = qfi_matrix(f.at(x), slds(f, x));
            RMat expect = RMat::Zero(3, 3);
            expect(0, 0) = 1.0 / (1.0 - lam * lam);
            expect(1, 1) = lam * lam;
            expect(2, 2) = lam * lam * std::sin(th) * std::sin(th);
            EXPECT_LT((fq - expect).norm(), 1e-9);
        }
}

TEST(Qfi, ThreeQubitMatchesKetOracle) {
    const ParamFamily f = families::three_qubit();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.2, 1.3);
    for (int trial = 0; trial < 5; ++trial) {
        RVec x(10);
        for (int i = 0; i < 10; ++i) x(i) = u(rng);
        EXPECT_LT((f.at(x).pure_vector().cwiseAbs() - three_qubit_oracle(x).cwiseAbs()).norm(), 1e-12);
        const RMat fq = qfi_matrix(f.at(x), slds(f, x));
        EXPECT_LT((fq - pure_qfi_oracle(three_qubit_oracle, x)).norm(), 1e-6);
    }
}

TEST(Qfi, ThreeQubitQuarterPiBlocks) {
    const ParamFamily f = families::three_qubit();
    const RVec x = all_quarter_pi(10);
    const RMat fq = qfi_matrix(f.at(x), slds(f, x));
    const RVec theta_diag = vec({4, 2, 1, 2, 1});
    EXPECT_LT((fq.topLeftCorner(5, 5) - RMat(theta_diag.asDiagonal())).norm(), 1e-9);
    const RVec phi_diag = vec({1, 7.0 / 16, 3.0 / 4, 7.0 / 16, 3.0 / 4});
    EXPECT_LT((fq.bottomRightCorner(5, 5).diagonal() - phi_diag).norm(), 1e-9);
    EXPECT_LT(fq.topRightCorner(5, 5).norm(), 1e-9);
}

TEST(Derivatives, AnalyticMatchesFiniteDifferences) {
    for (const auto& [name, f] : builtin_families()) {
        const RVec x = name == "qubit_bloch"   ? vec({0.6, 1.1, 0.3})
                       : name == "spin1_p"     ? vec({0.4})
                                               : RVec(RVec::LinSpaced(10, 0.3, 1.2));
        const auto a = f.drho(x);
        const auto n = f.drho_numeric(x, 1e-3, true);
        ASSERT_EQ(a.size(), n.size());
        for (size_t j = 0; j < a.size(); ++j) EXPECT_LT((a[j] - n[j]).norm(), 1e-8) << name << " " << j;
    }
}

TEST(Reparameterize, WhitensTheQfi) {
    const ParamFamily f = families::three_qubit();
    const RVec x = RVec::LinSpaced(10, 0.3, 1.2);
    const State rho = f.at(x);
    const auto l = slds(f, x);
    const RMat fq = qfi_matrix(rho, l);
    const auto lt = reparameterize(l, fq);
    EXPECT_LT((qfi_matrix(rho, lt) - RMat::Identity(10, 10)).norm(), 1e-8);
    const RMat r = spd_inv_sqrt(fq);
    EXPECT_LT((sld_imaginary_moments(rho, lt) - r * sld_imaginary_moments(rho, l) * r).norm(), 1e-8);
}

TEST(Cfi, BoundedByQfiForRandomPovm) {
    const ParamFamily f = families::qubit_bloch();
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        // Rank-one POVM from a random isometry C^2 -> C^4.
        const CMat u = testutil::random_unitary(4, rng).leftCols(2);
        std::vector<CMat> outs;
        for (int m = 0; m < 4; ++m) outs.push_back(u.row(m).adjoint() * u.row(m));
        const Povm povm(outs);
        const RVec x = vec({0.7, 0.9, 0.4});
        const RMat fq = qfi_matrix(f.at(x), slds(f, x));
        const RMat fc = cfi_matrix(f, povm, x);
        const double tr = (fq.inverse() * fc).trace();
        EXPECT_LE(tr, 1.0 + 1e-9);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<RMat>(fq - fc).eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(Cfi, TrivialPovmGivesZero) {
    const ParamFamily f = families::qubit_bloch();
    const Povm triv({CMat::Identity(2, 2)});
    EXPECT_LT(cfi_matrix(f, triv, vec({0.5, 1.0, 0.2})).norm(), 1e-12);
}

TEST(Cfi, ErrorMatrixIsQfiMinusCfi) {
    // With estimators f_j = d_j p / p the error matrix Q_Re equals F_Q - F_C.
    const ParamFamily f = families::qubit_bloch();
    const RVec x = vec({0.6, 1.0, 0.5});
    std::mt19937_64 rng(15);
    const CMat u = testutil::random_unitary(4, rng).leftCols(2);
    std::vector<CMat> outs;
    for (int m = 0; m < 4; ++m) outs.push_back(u.row(m).adjoint() * u.row(m));
    const Povm povm(outs);
    const State rho = f.at(x);
    const auto d = f.drho(x);
    const auto l = slds(f, x);
    const int n = 3;
    std::vector<CMat> est(n, CMat::Zero(2, 2));
    for (int m = 0; m < povm.size(); ++m) {
        const double p = trace_prod(rho.rho(), povm[m]).real();
        for (int j = 0; j < n; ++j) est[j] += trace_prod(d[j], povm[m]).real() / p * povm[m];
    }
    RMat q(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            // Re Tr(rho (L_j - O_j)(L_k - O_k)) with the second moment of the data.
            double second = 0.0;
            for (int m = 0; m < povm.size(); ++m) {
                const double p = trace_prod(rho.rho(), povm[m]).real();
                second += trace_prod(d[j], povm[m]).real() * trace_prod(d[k], povm[m]).real() / p;
            }
            q(j, k) = trace_prod(rho.rho(), l[j] * l[k]).real() -
                      trace_prod(rho.rho(), l[j] * est[k]).real() -
                      trace_prod(rho.rho(), est[j] * l[k]).real() + second;
        }
    const RMat fq = qfi_matrix(rho, l);
    EXPECT_LT((q - (fq - cfi_matrix(f, povm, x))).norm(), 1e-9);
}

TEST(ThreeQubit, FiveParameterBounds) {
    const ParamFamily base = families::three_qubit();
    const std::vector<int> active = {0, 1, 2, 6, 7};
    for (double t0 : {pi / 4, 0.6, 1.1}) {
        RVec x0 = all_quarter_pi(10);
        x0(0) = t0;
        const ParamFamily f = restrict_family(base, x0, active);
        RVec x(5);
        for (int i = 0; i < 5; ++i) x(i) = x0(active[i]);
        const State rho = f.at(x);
        const auto l = slds(f, x);
        const RMat fq = qfi_matrix(rho, l);
        const RMat s = sld_imaginary_moments(rho, l);
        const RMat r = spd_inv_sqrt(fq);
        EXPECT_NEAR((r * s * r).squaredNorm(), 4.0, 1e-8);
        EXPECT_NEAR(metrology_bound_analytic(fq, s), 5 - std::pow(std::sqrt(3.0) - 1, 2), 1e-8);
        EXPECT_NEAR(metrology_pairwise_ceiling(fq, s), 4.5, 1e-8);
    }
}

TEST(ThreeQubit, FiveParameterSdpNearThree) {
    RVec x0 = all_quarter_pi(10);
    const std::vector<int> active = {0, 1, 2, 6, 7};
    const ParamFamily f = restrict_family(families::three_qubit(), x0, active);
    const MetrologyReport rep = metrology_report(f, all_quarter_pi(5));
    EXPECT_EQ(rep.sdp_status, sdp::Status::optimal);
    EXPECT_NEAR(rep.sdp, 3.0, 0.1);
    EXPECT_NEAR(rep.analytic, 5 - std::pow(std::sqrt(3.0) - 1, 2), 1e-7);
    EXPECT_LE(rep.sdp, rep.analytic + 1e-6);
    EXPECT_LE(rep.analytic, rep.pairwise_ceiling + 1e-9);
    EXPECT_LE(rep.pairwise_ceiling, rep.pairwise_ea + 1e-9);
}

TEST(ThreeQubit, TenParameterBounds) {
    const ParamFamily f = families::three_qubit();
    const RVec x = all_quarter_pi(10);
    const auto t0 = std::chrono::steady_clock::now();
    const MetrologyReport rep = metrology_report(f, x);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const State rho = f.at(x);
    const auto l = slds(f, x);
    const RMat r = spd_inv_sqrt(rep.f_q);
    const RMat s = sld_imaginary_moments(rho, l);
    EXPECT_NEAR((r * s * r).squaredNorm(), 10.0, 1e-8);
    const double expect = 10 - std::pow(std::sqrt(std::sqrt(10.0) + 1) - 1, 2);
    EXPECT_NEAR(rep.analytic, expect, 1e-8);
    EXPECT_NEAR(rep.analytic, 8.918, 1e-3);
    EXPECT_NEAR(rep.pairwise_ceiling, 85.0 / 9, 1e-8);
    EXPECT_EQ(rep.sdp_status, sdp::Status::optimal);
    EXPECT_NEAR(rep.sdp, 5.0, 0.1);
    EXPECT_LT(secs, 120.0);
}

TEST(QubitBloch, AnalyticAndSdpBounds) {
    const ParamFamily f = families::qubit_bloch();
    const double expect = 3 - std::pow(std::sqrt(std::sqrt(2.0) + 1) - 1, 2);
    for (double lam : {0.3, 0.6, 0.9}) {
        const MetrologyReport rep = metrology_report(f, vec({lam, pi / 2, 0.0}));
        EXPECT_NEAR(rep.analytic, expect, 1e-6) << lam;
        EXPECT_EQ(rep.sdp_status, sdp::Status::optimal);
        EXPECT_NEAR(rep.sdp, 1.0, 1e-5) << lam;
        EXPECT_NEAR(rep.pairwise_ea, 1.5, 1e-6) << lam;
        EXPECT_LE(rep.sdp, rep.analytic);
    }
}

TEST(Collective, QfiIsAdditive) {
    const ParamFamily f = families::qubit_bloch();
    const ParamFamily f2 = collectivize(f, 2);
    const RVec x = vec({0.5, 1.0, 0.3});
    const RMat fq = qfi_matrix(f.at(x), slds(f, x));
    const RMat fq2 = qfi_matrix(f2.at(x), slds(f2, x));
    EXPECT_LT((fq2 - 2 * fq).norm(), 1e-8);
    for (size_t j = 0; j < 3; ++j) {
        const CMat lj = slds(f, x)[j];
        const CMat expect = kron(lj, CMat::Identity(2, 2)) + kron(CMat::Identity(2, 2), lj);
        EXPECT_LT((slds(f2, x)[j] - expect).norm(), 1e-8);
    }
}

TEST(Collective, TwoCopyAnalyticBoundAtEquator) {
    const ParamFamily f2 = collectivize(families::qubit_bloch(), 2);
    for (double lam : {0.2, 0.5, 0.8}) {
        const MetrologyReport rep = metrology_report(f2, vec({lam, pi / 2, 0.4}));
        const double m = std::max(std::sqrt(2.0) * lam, std::sqrt(0.5 * (1 + lam * lam)));
        EXPECT_NEAR(rep.analytic, 3 - std::pow(std::sqrt(m + 1) - 1, 2), 1e-8) << lam;
    }
}

TEST(Collective, RejectsOversizedDimension) {
    EXPECT_THROW(collectivize(families::three_qubit(), 3).at(all_quarter_pi(10)), ValidationError);
    EXPECT_THROW(collectivize(families::qubit_bloch(), 0), ValidationError);
}

TEST(TwoParam, AtLeastOzawa) {
    const ParamFamily f = families::qubit_bloch();
    const RVec x = vec({0.6, 1.2, 0.3});
    const auto l = slds(f, x);
    const State rho = f.at(x);
    const double ea = metrology_bound_two_param(rho, l[1], l[2]);
    EXPECT_GE(ea, bound_ozawa_pair(rho, l[1], l[2]).value - 1e-9);
}

TEST(Families, JsonRoundTrip) {
    const nlohmann::json j = {{"family", "three_qubit"},
                              {"params", std::vector<double>(10, pi / 4)},
                              {"active", {"theta0", "theta1", "theta2", "phi1", "phi2"}}};
    const auto [f, x] = family_from_json(j);
    EXPECT_EQ(f.n_params, 5);
    EXPECT_LT((x - all_quarter_pi(5)).norm(), 1e-15);
    EXPECT_THROW(family_from_json({{"family", "nope"}, {"params", {1}}}), ValidationError);
    EXPECT_THROW(family_from_json({{"family", "qubit_bloch"}, {"params", {1.5, 0, 0}}}).first.at(
                     vec({1.5, 0, 0})),
                 ValidationError);
    EXPECT_THROW(family_from_json({{"family", "qubit_bloch"}, {"params", {0.5, 0}}}), ValidationError);
}

TEST(Families, Spin1QfiClosedForm) {
    const ParamFamily f = families::spin1_p();
    for (double p : {0.2, 0.5, 0.8}) {
        const RMat fq = qfi_matrix(f.at(vec({p})), slds(f, vec({p})));
        EXPECT_NEAR(fq(0, 0), 1.0 / p + 1.0 / (1 - p), 1e-9);
    }
}
