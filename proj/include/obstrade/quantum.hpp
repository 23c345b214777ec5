#pragma once

#include <string>
#include <vector>

#include "obstrade/linalg.hpp"

namespace obstrade {

class State {
public:
    // Validates unit trace (1e-10) and PSD (eigenvalues >= -1e-10).
    explicit State(CMat rho);
    static State pure(const CVec& psi);

    const CMat& rho() const { return rho_; }
    int dim() const { return static_cast<int>(rho_.rows()); }
    // Second-largest eigenvalue below 1e-10.
    bool is_pure() const;
    // Dominant eigenvector, phase fixed so its largest component is real positive.
    CVec pure_vector() const;
    const CMat& sqrt_rho() const { return sqrt_rho_; }
    const RVec& eigenvalues() const { return evals_; }

private:
    CMat rho_;
    CMat sqrt_rho_;
    RVec evals_;
    CMat evecs_;
};

class ObservableSet {
public:
    // Checks shared dimension, Hermiticity and linear independence over the reals.
    explicit ObservableSet(std::vector<CMat> ops, bool check_independence = true);

    int size() const { return static_cast<int>(ops_.size()); }
    int dim() const { return ops_.empty() ? 0 : static_cast<int>(ops_[0].rows()); }
    const CMat& operator[](int j) const { return ops_[static_cast<size_t>(j)]; }
    const std::vector<CMat>& ops() const { return ops_; }

    ObservableSet subset(const std::vector<int>& idx) const;
    // Y_j = sum_k B(j,k) X_k.
    ObservableSet recombine(const RMat& b) const;

private:
    std::vector<CMat> ops_;
};

class Povm {
public:
    explicit Povm(std::vector<CMat> outcomes, std::vector<std::string> labels = {});

    int size() const { return static_cast<int>(outcomes_.size()); }
    int dim() const { return outcomes_.empty() ? 0 : static_cast<int>(outcomes_[0].rows()); }
    const CMat& operator[](int m) const { return outcomes_[static_cast<size_t>(m)]; }
    const std::vector<CMat>& outcomes() const { return outcomes_; }
    const std::vector<std::string>& labels() const { return labels_; }
    RVec probabilities(const State& s) const;

private:
    std::vector<CMat> outcomes_;
    std::vector<std::string> labels_;
};

// M_m = N^{-1/2} A_m^dag A_m N^{-1/2} with N = sum_m A_m^dag A_m.
Povm povm_from_factors(const std::vector<CMat>& a);

// values(j, m) = f_j(m).
struct ApproxMeasurement {
    ApproxMeasurement(Povm p, RMat v);
    Povm povm;
    RMat values;
};

void validate_weights(const RMat& w, int n);

struct BasisChoice {
    std::vector<CVec> vectors;
    std::vector<bool> transpose_flags;

    static BasisChoice computational(int d);
    // Columns of a unitary.
    static BasisChoice from_columns(const CMat& u);
    void validate(int d) const;
};

struct MomentData {
    RMat s_re;
    RMat s_im_tilde;
    RVec lambdas;
    std::vector<CVec> phis;  // empty where lambda < 1e-14
    CMat s_tilde() const;
};

struct CommutatorMoments {
    RMat comm;  // Tr(rho [X_j, X_k]) / 2i
    RMat anti;  // Tr(rho {X_j, X_k}) / 2
};

CommutatorMoments commutator_moments(const State& rho, const ObservableSet& x);
CMat approx_error_matrix(const State& rho, const ObservableSet& x, const ApproxMeasurement& am);
double weighted_error(const CMat& q, const RMat& w);
RMat optimal_values_for_povm(const State& rho, const ObservableSet& x, const Povm& povm);
MomentData moment_data(const State& rho, const ObservableSet& x, const BasisChoice& basis);

// The 2n x 2n Gram block [[Q_u, R_u], [R_u^dag, S_u]] for one vector u, from the
// dilated error vectors reduced to system level.
CMat moment_block(const State& rho, const ObservableSet& x, const ApproxMeasurement& am,
                  const CVec& u);
// Sum over the basis of moment_block, conjugated where the flag is set.
CMat assembled_moment_matrix(const State& rho, const ObservableSet& x,
                             const ApproxMeasurement& am, const BasisChoice& basis);

}  // namespace obstrade
