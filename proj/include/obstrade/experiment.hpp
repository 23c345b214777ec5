#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "obstrade/quantum.hpp"
#include "obstrade/sdp.hpp"

namespace obstrade {

// Outcome counts of one POVM on the states of a 3-state run. Row 0 is rho; rows
// 1 + 2j and 2 + 2j are X_j rho X_j and (I + X_j) rho (I + X_j), normalized.
struct CountTable {
    int outcomes = 0;
    long long shots = 0;  // per state
    std::uint64_t seed = 0;
    std::vector<std::string> labels;
    std::vector<std::vector<long long>> counts;

    int observables() const { return (static_cast<int>(counts.size()) - 1) / 2; }
    RVec frequencies(int row) const;
    // Rows must sum to shots with nonnegative entries. Labels match rows one to one.
    void validate() const;
    nlohmann::json to_json() const;
    static CountTable from_json(const nlohmann::json& j);
};

// Multinomial draw of `shots` outcomes with p_m = Tr(rho M_m), as a chain of
// conditional binomials on a mt19937_64 seeded with `seed`.
std::vector<long long> sample_counts(const State& rho, const Povm& povm, long long shots,
                                     std::uint64_t seed);

struct ThreeStates {
    State rho1;
    State rho2;
    State rho3;
    double norm2 = 1.0;  // Tr(X rho X)
    double norm3 = 1.0;  // Tr((I + X) rho (I + X))
};
ThreeStates three_state_states(const State& rho, const CMat& x);

struct RetraceSettings {
    // Data constraints become |Tr(rho_l M_m) - p_l(m)| <= prob_tolerance when positive.
    double prob_tolerance = 0.0;
    // Extra allowance tau on top of the smallest one that restores feasibility.
    double extra_slack = 0.0;
    // Keeps the relaxed feasible set full-dimensional.
    double min_radius = 1e-8;
    // Relaxations above this count as inconsistent data.
    double consistency_tol = 1e-7;
    double rank_tol = 1e-10;
    sdp::Settings sdp{1e-9, 1e-8, 200, false};
};

struct RetraceInterval {
    double min = 0.0;
    double max = 0.0;
};

// Bounds on Re Tr(rho M_m X) over all POVMs {M_m} with sum M_m = I, M_m >= 0 and
// Tr(rho_l M_m) = p_l(m) on an independent subset of the data constraints. Data
// that no POVM reproduces keeps its equalities and relaxes positivity to
// M_m + tau I >= 0, with tau* the smallest value that admits a solution.
class Retrace {
public:
    Retrace(const std::vector<State>& states, const std::vector<RVec>& probs, int outcomes,
            const State& rho, const CMat& x, const RetraceSettings& settings = {});

    RetraceInterval interval(int m) const;
    double relaxation() const { return relaxation_; }  // tau*, 0 when consistent
    bool relaxed() const { return relaxed_; }
    int constraints_used() const { return static_cast<int>(rows_.size()); }
    int constraints_total() const { return total_; }
    // W with alpha_m = a0 + sum_{l,m'} W(l, m') p_l(m') when the equalities fix
    // alpha_m, so that sampling noise can be propagated. Empty otherwise.
    std::optional<RMat> data_weights(int m) const;

private:
    sdp::SdpProblem base_problem(std::vector<sdp::HermitianVar>& vars, int* t_var, double radius) const;

    int d_ = 0;
    int k_ = 0;
    State rho_;
    CMat x_;
    RetraceSettings settings_;
    std::vector<RVec> rows_;  // selected data rows over the stacked coordinates
    std::vector<double> rhs_;
    std::vector<int> row_state_;  // (l, m) origin of each selected data row
    std::vector<int> row_outcome_;
    int n_states_ = 0;
    RMat a_;  // completeness rows then data rows
    RVec b_;
    RVec c_coords_;  // Re Tr(rho M X) per coordinate of one outcome
    int total_ = 0;
    double relaxation_ = 0.0;
    bool relaxed_ = false;
    std::vector<RetraceInterval> exact_;  // filled when the data fixes the POVM
};

RetraceInterval bound_retrace_sdp(const std::vector<State>& states,
                                  const std::vector<RVec>& probs, int outcomes, const State& rho,
                                  const CMat& x, int target, const RetraceSettings& settings = {});

struct ErrorInterval {
    double eps_min = 0.0;
    double eps_max = 0.0;
    bool clipped = false;  // a negative squared error was clipped to 0
    bool relaxed = false;  // the retrace needed the cone relaxation
    double relaxation = 0.0;
    int skipped_outcomes = 0;  // outcomes with p_1(m) = 0
    // Signed squared errors from the minimal and maximal alphas, before clipping.
    double sq_a = 0.0;
    double sq_b = 0.0;
    // Signed point estimate of epsilon^2. With a shot count it carries the
    // second-order correction for the bias of alpha^2 / p_1.
    double sq_point = 0.0;
    bool bias_corrected = false;
    double mid() const { return 0.5 * (eps_min + eps_max); }
};

struct ErrorEstimate {
    std::vector<ErrorInterval> per_observable;
    // Sum over j of the squared midpoints.
    double total_sq() const;
    // Sum over j of sq_point. Averaging this over repeats avoids the upward bias
    // that clipping adds when some epsilon_j is 0.
    double total_sq_point() const;
    nlohmann::json to_json() const;
};

// Error intervals from probability rows laid out as in CountTable. shots > 0
// marks them as frequencies and enables the bias correction of sq_point.
ErrorEstimate estimate_errors_from_probabilities(const std::vector<RVec>& probs, const State& rho,
                                                 const ObservableSet& x,
                                                 const RetraceSettings& settings = {},
                                                 long long shots = 0);
ErrorEstimate estimate_errors(const CountTable& counts, const State& rho, const ObservableSet& x,
                              const RetraceSettings& settings = {});
// Noise-free probabilities of the 3-state run.
std::vector<RVec> exact_probabilities(const State& rho, const ObservableSet& x, const Povm& povm);

// Samples every row of a 3-state run; row r uses derive_seed(seed, r).
CountTable simulate_counts(const State& rho, const ObservableSet& x, const Povm& povm,
                           long long shots, std::uint64_t seed);

// epsilon_j from the POVM with the optimal value assignment, evaluated directly.
RVec direct_errors(const State& rho, const ObservableSet& x, const Povm& povm);

struct RepeatSummary {
    std::vector<double> totals;  // total_sq_point per repeat
    double mean = 0.0;
    double stddev = 0.0;
    double stderr_mean = 0.0;
    double max_width = 0.0;  // widest eps interval seen
};
// `repeats` independent runs with derive_seed(seed, r), spread over `threads` workers.
RepeatSummary repeat_experiment(const State& rho, const ObservableSet& x, const Povm& povm,
                                long long shots, int repeats, std::uint64_t seed,
                                int threads = 1, const RetraceSettings& settings = {});

// The measurement the simulated experiment uses: the frame construction for pure
// states, the local-search optimum for mixed ones.
Povm experiment_povm(const State& rho, const ObservableSet& x, std::uint64_t seed = 1);

}  // namespace obstrade
