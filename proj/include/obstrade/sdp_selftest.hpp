#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "obstrade/sdp.hpp"

namespace obstrade::sdp {

// min t  s.t.  t I - A >= 0. Optimum lambda_max(A).
SdpProblem lambda_max_problem(const CMat& a);
// min Tr(C X)  s.t.  X >= 0, Tr X = 1. Optimum lambda_min(C).
SdpProblem lambda_min_problem(const CMat& c);
// One LMI of size 2..4 with 1..6 variables and a known strictly feasible pair:
// F(y0) = I and c_i = Tr(F_i X0) with X0 > 0. Every third draw is real.
SdpProblem random_feasible_problem(std::mt19937_64& rng, bool complex_block);

struct SelfTestCheck {
    std::string name;
    double value = 0.0;
    double reference = 0.0;  // exact optimum, or 0 for residual checks
    double tol = 0.0;
    bool pass = false;
};

// Toy eigenvalue problems against Eigen and KKT residuals on random feasible problems.
std::vector<SelfTestCheck> self_test(std::uint64_t seed = 1, int random_problems = 50);

}  // namespace obstrade::sdp
