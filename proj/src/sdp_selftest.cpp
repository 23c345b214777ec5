#include "obstrade/sdp_selftest.hpp"

#include <algorithm>
#include <cmath>

namespace obstrade::sdp {

namespace {

CMat random_complex(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(g(rng), g(rng));
    return m;
}

CMat random_hermitian(int d, std::mt19937_64& rng) {
    const CMat a = random_complex(d, rng);
    return 0.5 * (a + a.adjoint());
}

}  // namespace

SdpProblem lambda_max_problem(const CMat& a) {
    SdpProblem p;
    const int t = p.add_variable("t");
    const int b = p.add_block(static_cast<int>(a.rows()));
    p.add_constant(b, 0, 0, -a);
    p.add_term(b, t, 0, 0, CMat::Identity(a.rows(), a.cols()));
    p.set_objective(t, 1.0);
    return p;
}

SdpProblem lambda_min_problem(const CMat& c) {
    SdpProblem p;
    const int d = static_cast<int>(c.rows());
    HermitianVar x(p, d, "X");
    const int b = p.add_block(d);
    x.place(p, b, 0, 0);
    x.add_objective_trace(p, c);
    Equality tr;
    for (const auto& [var, basis] : x.basis())
        if (std::abs(basis.trace()) > 0) tr.terms.push_back({var, basis.trace().real()});
    tr.rhs = 1.0;
    p.add_equality(tr);
    return p;
}

SdpProblem random_feasible_problem(std::mt19937_64& rng, bool complex_block) {
    std::uniform_int_distribution<int> md(1, 6), dd(2, 4);
    const int m = md(rng), d = dd(rng);
    SdpProblem p;
    const int b = p.add_block(d, complex_block);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto realify = [&](CMat a) { return complex_block ? a : CMat(a.real().cast<cplx>()); };
    const CMat g = random_complex(d, rng);
    const CMat x0 = realify(g * g.adjoint() + CMat::Identity(d, d));
    CMat s0 = CMat::Identity(d, d);
    for (int i = 0; i < m; ++i) {
        p.add_variable("y" + std::to_string(i));
        const CMat fi = realify(random_hermitian(d, rng));
        p.add_term(b, i, 0, 0, fi);
        s0 -= u(rng) * fi;
        p.set_objective(i, trace_prod(fi, x0).real());
    }
    p.add_constant(b, 0, 0, s0);
    return p;
}

std::vector<SelfTestCheck> self_test(std::uint64_t seed, int random_problems) {
    std::mt19937_64 rng(seed);
    Settings tight;
    tight.tol_feas = 1e-10;
    tight.tol_gap = 1e-10;
    std::vector<SelfTestCheck> out;
    auto eig = [](const CMat& a) { return Eigen::SelfAdjointEigenSolver<CMat>(a).eigenvalues(); };
    for (int d : {1, 2, 4, 7}) {
        const CMat a = random_hermitian(d, rng);
        const SdpSolution s = solve(lambda_max_problem(a), tight);
        const double ref = eig(a).maxCoeff();
        out.push_back({"lambda_max_d" + std::to_string(d), s.objective_value, ref, 1e-8,
                       s.status == Status::optimal && std::abs(s.objective_value - ref) <= 1e-8});
    }
    for (int d : {2, 3, 5}) {
        const CMat c = random_hermitian(d, rng);
        const SdpSolution s = solve(lambda_min_problem(c), tight);
        const double ref = eig(c).minCoeff();
        out.push_back({"lambda_min_d" + std::to_string(d), s.objective_value, ref, 1e-8,
                       s.status == Status::optimal && std::abs(s.objective_value - ref) <= 1e-8});
    }
    for (int t = 0; t < random_problems; ++t) {
        const SdpProblem p = random_feasible_problem(rng, t % 3 != 0);
        const SdpSolution s = solve(p);
        const Residuals r = verify(s, p);
        const double worst = std::max({r.primal, r.dual, r.gap});
        out.push_back({"kkt_random_" + std::to_string(t), worst, 0.0, 1e-7,
                       s.status == Status::optimal && worst < 1e-7 &&
                           s.dual_objective <= s.objective_value + 1e-7});
    }
    return out;
}

}  // namespace obstrade::sdp
