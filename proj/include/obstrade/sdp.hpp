#pragma once

#include <string>
#include <utility>
#include <vector>

#include "obstrade/linalg.hpp"

namespace obstrade::sdp {

// One entry of a Hermitian coefficient matrix. Both triangles are stored.
struct Entry {
    int row;
    int col;
    cplx value;
};

struct LmiBlock {
    int dim = 0;
    bool complex = true;  // false: real symmetric block
    CMat constant;
    std::vector<std::pair<int, std::vector<Entry>>> terms;
};

struct LinearTerm {
    int var;
    double coeff;
};

struct Equality {
    std::vector<LinearTerm> terms;
    double rhs = 0.0;
};

// minimize c'y + c0  subject to  F_b(y) = C_b + sum_i y_i F_{b,i} >= 0 for each block,
// and the affine equalities.
class SdpProblem {
public:
    int add_variable(std::string name);
    int num_variables() const { return static_cast<int>(names_.size()); }
    const std::string& name(int i) const { return names_[static_cast<size_t>(i)]; }

    int add_block(int dim, bool complex = true);
    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    const LmiBlock& block(int b) const { return blocks_[static_cast<size_t>(b)]; }

    // Adds G at offset (r0, c0) and, when off the diagonal, G^dag at (c0, r0).
    void add_constant(int block, int r0, int c0, const CMat& g);
    void add_term(int block, int var, int r0, int c0, const CMat& g);
    void add_term_entries(int block, int var, std::vector<Entry> entries);

    void set_objective(int var, double c) { c_(var) = c; }
    void add_objective(int var, double c) { c_(var) += c; }
    void set_objective_constant(double c0) { c0_ = c0; }
    const RVec& objective() const { return c_; }
    double objective_constant() const { return c0_; }

    void add_equality(Equality e) { eqs_.push_back(std::move(e)); }
    const std::vector<Equality>& equalities() const { return eqs_; }

    // Throws ValidationError on malformed structure or non-Hermitian coefficients.
    void validate() const;
    CMat evaluate_block(int b, const RVec& y) const;
    double evaluate_objective(const RVec& y) const { return c_.dot(y) + c0_; }

private:
    std::vector<std::string> names_;
    RVec c_ = RVec::Zero(0);
    double c0_ = 0.0;
    std::vector<LmiBlock> blocks_;
    std::vector<Equality> eqs_;
};

// A Hermitian d x d matrix of unknowns: d real diagonal entries and a real and
// an imaginary part for each strictly upper entry.
class HermitianVar {
public:
    HermitianVar() = default;
    HermitianVar(SdpProblem& p, int d, const std::string& name);
    int dim() const { return d_; }
    // Basis element and its variable index, in creation order.
    const std::vector<std::pair<int, CMat>>& basis() const { return basis_; }
    CMat value(const RVec& y) const;
    void place(SdpProblem& p, int block, int r0, int c0, double scale = 1.0) const;
    // Objective contribution sum_i y_i Re Tr(C B_i) * scale.
    void add_objective_trace(SdpProblem& p, const CMat& c, double scale = 1.0) const;

private:
    int d_ = 0;
    std::vector<std::pair<int, CMat>> basis_;
};

enum class Status { optimal, infeasible, unbounded, numerical_failure };
std::string to_string(Status s);

struct Settings {
    double tol_feas = 1e-8;
    double tol_gap = 1e-7;
    int max_iters = 200;
    bool verbose = false;
};

struct Residuals {
    double primal = 0.0;  // LMI violation and equality residual
    double dual = 0.0;    // dual equation residual and dual PSD violation
    double gap = 0.0;     // relative duality gap
};

struct SdpSolution {
    Status status = Status::numerical_failure;
    double objective_value = 0.0;  // c'y + c0 at the returned iterate
    double dual_objective = 0.0;   // certified lower bound
    RVec y;
    std::vector<CMat> block_duals;  // one Hermitian multiplier per LMI block
    RVec equality_duals;
    Residuals residuals;
    int iterations = 0;
    std::string message;
};

SdpSolution solve(const SdpProblem& p, const Settings& settings = {});
// Residuals recomputed from the problem data and the returned iterate only.
Residuals verify(const SdpSolution& s, const SdpProblem& p);

}  // namespace obstrade::sdp
