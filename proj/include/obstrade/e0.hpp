#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "obstrade/quantum.hpp"
#include "obstrade/sdp.hpp"

namespace obstrade {

// Primal model: minimize Tr[(W (x) rho)(S - R X^dag - X R^dag + X X^dag)] over
// Hermitian R_j and symmetric Hermitian blocks S_jk with [[I, R^dag], [R, S]] >= 0.
struct E0Model {
    sdp::SdpProblem problem;
    std::vector<sdp::HermitianVar> r;
    std::vector<std::vector<sdp::HermitianVar>> s;  // s[j][k] valid for j <= k
    int block = 0;
    int n = 0;
    int d = 0;
};

E0Model build_e0_model(const State& rho, const ObservableSet& x, const RMat& w);
inline sdp::SdpProblem build_e0(const State& rho, const ObservableSet& x, const RMat& w) {
    return build_e0_model(rho, x, w).problem;
}

struct E0Witness {
    double value = 0.0;
    double dual_value = 0.0;  // certified lower bound from the dual iterate
    std::vector<CMat> r_ops;
    std::vector<std::vector<CMat>> s_blocks;  // full n x n, s_blocks[k][j] == s_blocks[j][k]
    sdp::Status status = sdp::Status::numerical_failure;
    sdp::Residuals residuals;
    int iterations = 0;
};

E0Witness bound_e0(const State& rho, const ObservableSet& x, const RMat& w,
                   const sdp::Settings& settings = {});
// Convenience for W = I.
E0Witness bound_e0(const State& rho, const ObservableSet& x, const sdp::Settings& settings = {});

// min eig of [[I, R^dag], [R, S]] from the witness blocks.
double witness_psd_margin(const E0Witness& w);

struct OptimalMeasurement {
    ApproxMeasurement measurement;
    double achieved = 0.0;     // Tr(W Q_Re) evaluated directly
    double bound = 0.0;        // E_0 used as the target
    std::vector<CVec> r_vectors;  // |r_j> reproduced by the measurement
    double im_gram_raw = 0.0;  // max |Im <r_j|r_k>| of the unrectified SDP witness
};

// Optimal-measurement construction for pure states. The SDP witness seeds a frame search that
// restores a real Gram matrix; the result is refused unless it matches E_0 to 1e-6.
OptimalMeasurement optimal_povm_pure(const State& psi, const ObservableSet& x, const RMat& w,
                                     const std::optional<E0Witness>& witness = std::nullopt,
                                     const sdp::Settings& settings = {});
// Closed-form two-observable variant with W = diag(w1, w2); no SDP unless alpha = |beta|.
OptimalMeasurement optimal_povm_pure_two(const State& psi, const CMat& x1, const CMat& x2,
                                         double w1 = 1.0, double w2 = 1.0);

// Measurement with M_m = |u'_m><u'_m| built from an orthonormal frame u (first column
// psi) and real coefficients r_j = sum_k lambda(j,k) u_k, plus the completion M_0.
ApproxMeasurement measurement_from_frame(const CMat& u, const RMat& lambda, int d);

// n x n orthogonal DCT-II matrix, first column 1/sqrt(n).
RMat dct_matrix(int n);

struct OracleResult {
    double best_error = 0.0;
    std::optional<Povm> best_povm;
    RMat best_assignment;
    int restarts_used = 0;
    std::vector<double> restart_errors;
};

struct OracleSettings {
    int outcomes = 0;  // 0 selects n + 2
    int restarts = 32;
    std::uint64_t seed = 1;
    int nm_iterations = 4000;
    int polish_iterations = 500;
    int threads = 1;
};

// Best-effort local search over K-outcome POVMs with the optimal value assignment.
OracleResult brute_force_min_error(const State& rho, const ObservableSet& x, const RMat& w,
                                   const OracleSettings& settings = {});

}  // namespace obstrade
