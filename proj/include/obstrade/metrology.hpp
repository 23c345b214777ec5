#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "obstrade/analytic.hpp"
#include "obstrade/e0.hpp"
#include "obstrade/quantum.hpp"

namespace obstrade {

// x -> rho_x with its partial derivatives. Without an analytic derivative the
// family falls back to central differences with step h.
struct ParamFamily {
    std::string name;
    int n_params = 0;
    std::vector<std::string> param_names;
    std::function<State(const RVec&)> state;
    std::function<std::vector<CMat>(const RVec&)> derivative;
    double h = 1e-5;

    State at(const RVec& x) const;
    std::vector<CMat> drho(const RVec& x) const;
    // Central differences; richardson combines steps h and h/2.
    std::vector<CMat> drho_numeric(const RVec& x, double step, bool richardson = false) const;
};

// Eigenbasis SLD, entries with lambda_a + lambda_b <= 1e-12 set to 0. Throws when
// drho has weight on the kernel block of rho.
CMat sld(const State& rho, const CMat& drho);
std::vector<CMat> slds(const ParamFamily& f, const RVec& x);

// Re Tr(rho L_j L_k).
RMat qfi_matrix(const State& rho, const std::vector<CMat>& l);
// Im Tr(rho L_j L_k).
RMat sld_imaginary_moments(const State& rho, const std::vector<CMat>& l);
// sum_m d_j p d_k p / p over outcomes with p >= 1e-12.
RMat cfi_matrix(const ParamFamily& f, const Povm& povm, const RVec& x);

// L~_k = sum_j (F_Q^{-1/2})_{jk} L_j, so that the new QFI is the identity.
std::vector<CMat> reparameterize(const std::vector<CMat>& l, const RMat& f_q);

// n - (sqrt(||F^{-1/2} S F^{-1/2}||_F + 1) - 1)^2.
double metrology_bound_analytic(const RMat& f_q, const RMat& s_im_tilde);
// Ceiling of any pairwise summation: n - ||F^{-1/2} S F^{-1/2}||_F^2 / (2(n-1)).
double metrology_pairwise_ceiling(const RMat& f_q, const RMat& s_im);

struct MetrologySdp {
    double value = 0.0;  // n - E_0(rho, L~)
    E0Witness e0;
};
MetrologySdp metrology_bound_sdp(const State& rho, const std::vector<CMat>& l,
                                 const sdp::Settings& settings = {});

// Lower bound on w1 (F_Q - F_C)_11 + w2 (F_Q - F_C)_22, the pair bound E_A on the SLDs.
double metrology_bound_two_param(const State& rho, const CMat& l1, const CMat& l2, double w1 = 1.0,
                                 double w2 = 1.0,
                                 const std::optional<BasisChoice>& basis = std::nullopt);

// rho -> rho^{(x)p}; guarded by d^p <= 256.
ParamFamily collectivize(const ParamFamily& f, int copies);
// Family over the active coordinates of f, the others frozen at base.
ParamFamily restrict_family(const ParamFamily& f, const RVec& base, const std::vector<int>& active);

namespace families {
// (lambda, theta, phi) Bloch parametrization, |lambda| <= 1.
ParamFamily qubit_bloch();
// sin t0 |psi1> + cos t0 e^{i p0} |psi2> over (t0..t4, p0..p4).
ParamFamily three_qubit();
// diag(p/2, 1-p, p/2), 0 <= p <= 1.
ParamFamily spin1_p();
}  // namespace families

std::map<std::string, ParamFamily> builtin_families();

// {"family": name, "params": [...], "active": [...], "copies": p}. Returns the
// family (restricted and collectivized as asked) and the point to evaluate it at.
std::pair<ParamFamily, RVec> family_from_json(const nlohmann::json& j);

// Every bound for one family point. analytic uses the qubit basis search for d = 2,
// the flag search over the computational basis otherwise.
struct MetrologyReport {
    RMat f_q;
    double analytic = 0.0;
    double sdp = 0.0;
    double pairwise_ea = 0.0;       // n - sum of E_A over pairs of L~ / (n-1)
    double pairwise_ceiling = 0.0;  // n - ||S~||_F^2 / (2(n-1))
    sdp::Status sdp_status = sdp::Status::numerical_failure;
    nlohmann::json to_json() const;
};
MetrologyReport metrology_report(const ParamFamily& f, const RVec& x,
                                 const sdp::Settings& settings = {});

}  // namespace obstrade
