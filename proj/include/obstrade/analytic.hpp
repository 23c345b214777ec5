#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "json.hpp"
#include "obstrade/quantum.hpp"

namespace obstrade {

// alpha = w1 Var X1 + w2 Var X2, beta the signed or nuclear-norm commutator term.
struct PairBoundTerms {
    double alpha = 0.0;
    double beta = 0.0;
    double value = 0.0;
    double mu_plus = std::numeric_limits<double>::quiet_NaN();  // pure closed form only
};

struct BoundReport {
    std::string method;
    double value = 0.0;
    nlohmann::json witness = nlohmann::json::object();
};

// (1/2)(alpha - sqrt(alpha^2 - beta^2)), the negative radicand clipped to 0.
double pair_value(double alpha, double beta);

// Frobenius bound for the flags already baked into md. value bounds the plain sum
// of squared errors: lambda_min(S_Re) times the bound on Tr(S_Re^-1 Q_Re), which
// the witness carries as "rhs" next to the normalized norm.
BoundReport bound_multi_analytic(const MomentData& md);
// Same bound, maximized over the transpose flags of the given basis vectors.
// Exhaustive for up to 12 vectors, greedy beyond.
BoundReport bound_multi_analytic_search(const State& rho, const ObservableSet& x,
                                        const std::vector<CVec>& basis);

PairBoundTerms bound_ozawa_pair(const State& rho, const CMat& x1, const CMat& x2,
                                double w1 = 1.0, double w2 = 1.0);
// Minimal eps1^2 + eps2^2 allowed by Branciard's relation with c12 = |Tr(rho[X1,X2])|/2.
PairBoundTerms bound_branciard_pair(const State& rho, const CMat& x1, const CMat& x2,
                                    double w1 = 1.0, double w2 = 1.0);
PairBoundTerms bound_pure_pair_closed_form(const State& psi, const CMat& x1, const CMat& x2,
                                           double w1 = 1.0, double w2 = 1.0);

// Eigenvectors of sqrt(rho)[X1,X2]sqrt(rho).
BasisChoice default_ea_basis(const State& rho, const CMat& x1, const CMat& x2);
BoundReport bound_mixed_pair_EA(const State& rho, const CMat& x1, const CMat& x2, double w1 = 1.0,
                                double w2 = 1.0,
                                const std::optional<BasisChoice>& basis = std::nullopt);

struct QubitBasis {
    BasisChoice basis;
    double norm = 0.0;  // achieved Frobenius norm of the refined imaginary part
};
QubitBasis qubit_optimal_basis(const State& rho, const ObservableSet& x);

enum class PairMethod { ozawa, branciard, ea };
std::string to_string(PairMethod m);
PairMethod pair_method_from_string(const std::string& s);

using PairBoundFn =
    std::function<double(const State&, const CMat&, const CMat&, double, double)>;
PairBoundFn pair_bound_fn(PairMethod m);

// (1/(n-1)) sum_{j<k} pair(X_j, X_k; W_jj, W_kk).
BoundReport pairwise_sum_bound(const State& rho, const ObservableSet& x, const RMat& w,
                               PairMethod m);
BoundReport pairwise_sum_bound(const State& rho, const ObservableSet& x, const RMat& w,
                               const PairBoundFn& pair, const std::string& method);

}  // namespace obstrade
