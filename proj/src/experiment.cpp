#include "obstrade/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "obstrade/e0.hpp"
#include "obstrade/parallel.hpp"

namespace obstrade {

namespace {

constexpr double kDegenerateNorm = 1e-12;
const char* kCountSchema = "obstrade.counts/1";

RVec probabilities_of(const State& s, const Povm& povm) {
    RVec p(povm.size());
    for (int m = 0; m < povm.size(); ++m) p(m) = trace_prod(s.rho(), povm[m]).real();
    return p;
}

// Greedy Gram-Schmidt: keeps rows that add rank above the relative threshold.
class RowBasis {
public:
    explicit RowBasis(int n) : n_(n) {}
    bool add(const RVec& row, double tol) {
        RVec r = row;
        for (int pass = 0; pass < 2; ++pass)
            for (const RVec& q : q_) r -= q.dot(r) * q;
        if (r.norm() <= tol * std::max(1.0, row.norm())) return false;
        q_.push_back(r / r.norm());
        return true;
    }
    int rank() const { return static_cast<int>(q_.size()); }
    int cols() const { return n_; }

private:
    int n_;
    std::vector<RVec> q_;
};

}  // namespace

RVec CountTable::frequencies(int row) const {
    const auto& c = counts.at(static_cast<size_t>(row));
    RVec f(static_cast<Eigen::Index>(c.size()));
    for (size_t m = 0; m < c.size(); ++m)
        f(static_cast<Eigen::Index>(m)) = static_cast<double>(c[m]) / static_cast<double>(shots);
    return f;
}

void CountTable::validate() const {
    if (shots < 1) throw ValidationError("count table: shots must be >= 1");
    if (outcomes < 1) throw ValidationError("count table: outcomes must be >= 1");
    if (counts.empty() || counts.size() % 2 == 0)
        throw ValidationError("count table: expected 1 + 2n rows (rho, then two rows per observable)");
    if (labels.size() != counts.size())
        throw ValidationError("count table: one label per row required");
    for (size_t r = 0; r < counts.size(); ++r) {
        if (static_cast<int>(counts[r].size()) != outcomes)
            throw ValidationError("count table: row " + std::to_string(r) + " has the wrong length");
        long long sum = 0;
        for (long long c : counts[r]) {
            if (c < 0) throw ValidationError("count table: negative count in row " + std::to_string(r));
            sum += c;
        }
        if (sum != shots)
            throw ValidationError("count table: row " + std::to_string(r) + " sums to " +
                                  std::to_string(sum) + ", expected " + std::to_string(shots));
    }
}

nlohmann::json CountTable::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t r = 0; r < counts.size(); ++r)
        rows.push_back({{"label", labels[r]}, {"counts", counts[r]}});
    return {{"schema", kCountSchema},
            {"outcomes", outcomes},
            {"shots", shots},
            {"seed", seed},
            {"rows", rows}};
}

CountTable CountTable::from_json(const nlohmann::json& j) {
    CountTable t;
    try {
        if (j.contains("schema") && j.at("schema").get<std::string>() != kCountSchema)
            throw ValidationError("count table: unsupported schema " + j.at("schema").dump());
        t.outcomes = j.at("outcomes").get<int>();
        t.shots = j.at("shots").get<long long>();
        t.seed = j.value("seed", std::uint64_t{0});
        for (const auto& row : j.at("rows")) {
            t.labels.push_back(row.value("label", std::string()));
            t.counts.push_back(row.at("counts").get<std::vector<long long>>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("count table: ") + e.what());
    }
    t.validate();
    return t;
}

std::vector<long long> sample_counts(const State& rho, const Povm& povm, long long shots,
                                     std::uint64_t seed) {
    if (shots < 1) throw ValidationError("sample_counts: shots must be >= 1");
    if (povm.dim() != rho.dim()) throw ValidationError("sample_counts: POVM dimension mismatch");
    RVec p = probabilities_of(rho, povm).cwiseMax(0.0);
    p /= p.sum();
    std::mt19937_64 rng(seed);
    std::vector<long long> counts(static_cast<size_t>(povm.size()), 0);
    long long left = shots;
    double mass = 1.0;
    for (int m = 0; m + 1 < povm.size() && left > 0; ++m) {
        const double q = mass > 0.0 ? std::clamp(p(m) / mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<long long> b(left, q);
        counts[static_cast<size_t>(m)] = b(rng);
        left -= counts[static_cast<size_t>(m)];
        mass -= p(m);
    }
    counts.back() += left;
    return counts;
}

ThreeStates three_state_states(const State& rho, const CMat& x) {
    require_hermitian(x, "X");
    if (x.rows() != rho.dim()) throw ValidationError("three_state_states: dimension mismatch");
    const CMat id = CMat::Identity(x.rows(), x.cols());
    const CMat a = x * rho.rho() * x;
    const CMat b = (id + x) * rho.rho() * (id + x);
    const double n2 = a.trace().real(), n3 = b.trace().real();
    if (n2 <= kDegenerateNorm || n3 <= kDegenerateNorm)
        throw ValidationError(
            "three_state_states: Tr(X rho X) or Tr((I+X) rho (I+X)) vanishes; shift X by a "
            "constant multiple of the identity and retry");
    return {rho, State(a / n2), State(b / n3), n2, n3};
}

Retrace::Retrace(const std::vector<State>& states, const std::vector<RVec>& probs, int outcomes,
                 const State& rho, const CMat& x, const RetraceSettings& settings)
    : d_(rho.dim()), k_(outcomes), rho_(rho), x_(x), settings_(settings),
      n_states_(static_cast<int>(states.size())) {
    require_hermitian(x, "X");
    if (outcomes < 1) throw ValidationError("retrace: need at least one outcome");
    if (states.size() != probs.size() || states.empty())
        throw ValidationError("retrace: one probability row per state required");
    if (x.rows() != d_) throw ValidationError("retrace: X dimension mismatch");
    for (size_t l = 0; l < states.size(); ++l) {
        if (states[l].dim() != d_) throw ValidationError("retrace: state dimension mismatch");
        if (probs[l].size() != outcomes || !probs[l].allFinite())
            throw ValidationError("retrace: probability row " + std::to_string(l) + " malformed");
    }

    // Hermitian coordinates shared by every outcome, in HermitianVar order.
    sdp::SdpProblem scratch;
    const sdp::HermitianVar proto(scratch, d_, "M");
    const int dd = d_ * d_, nv = k_ * dd;

    RowBasis basis(nv);
    for (int i = 0; i < dd; ++i) {
        RVec row = RVec::Zero(nv);
        for (int m = 0; m < k_; ++m) row(m * dd + i) = 1.0;
        basis.add(row, settings_.rank_tol);
    }
    for (size_t l = 0; l < states.size(); ++l)
        for (int m = 0; m < k_; ++m) {
            RVec row = RVec::Zero(nv);
            for (int i = 0; i < dd; ++i)
                row(m * dd + i) = trace_prod(states[l].rho(), proto.basis()[static_cast<size_t>(i)].second).real();
            ++total_;
            if (basis.add(row, settings_.rank_tol)) {
                rows_.push_back(row);
                rhs_.push_back(probs[l](m));
                row_state_.push_back(static_cast<int>(l));
                row_outcome_.push_back(m);
            }
        }

    // All equality rows: the POVM completeness first, then the selected data.
    const int nr = dd + static_cast<int>(rows_.size());
    a_ = RMat::Zero(nr, nv);
    b_ = RVec::Zero(nr);
    for (int i = 0; i < dd; ++i) {
        for (int m = 0; m < k_; ++m) a_(i, m * dd + i) = 1.0;
        const CMat& bi = proto.basis()[static_cast<size_t>(i)].second;
        b_(i) = bi.trace().real() / (bi.adjoint() * bi).trace().real();
    }
    for (size_t r = 0; r < rows_.size(); ++r) {
        a_.row(dd + static_cast<int>(r)) = rows_[r].transpose();
        b_(dd + static_cast<int>(r)) = rhs_[r];
    }
    const CMat c = 0.5 * (rho.rho() * x + x * rho.rho());
    c_coords_ = RVec(dd);
    for (int i = 0; i < dd; ++i)
        c_coords_(i) = trace_prod(c, proto.basis()[static_cast<size_t>(i)].second).real();

    if (basis.rank() == nv && settings_.prob_tolerance <= 0.0) {
        // The equalities pin down every M_m.
        const RVec y = a_.colPivHouseholderQr().solve(b_);
        double low = 0.0;
        for (int m = 0; m < k_; ++m) {
            CMat mm = CMat::Zero(d_, d_);
            for (int i = 0; i < dd; ++i) mm += y(m * dd + i) * proto.basis()[static_cast<size_t>(i)].second;
            low = std::min(low, eig_hermitian(mm).values.minCoeff());
            const double v = c_coords_.dot(y.segment(m * dd, dd));
            exact_.push_back({v, v});
        }
        relaxation_ = -low;
        relaxed_ = relaxation_ > settings_.consistency_tol;
        return;
    }

    std::vector<sdp::HermitianVar> vars;
    int t = -1;
    sdp::SdpProblem p = base_problem(vars, &t, 0.0);
    p.set_objective(t, 1.0);
    const sdp::SdpSolution s = sdp::solve(p, settings_.sdp);
    if (s.status != sdp::Status::optimal)
        throw SolverError("retrace: cone relaxation problem ended with status " +
                          sdp::to_string(s.status));
    relaxation_ = std::max(0.0, s.objective_value);
    relaxed_ = relaxation_ > settings_.consistency_tol;
}

sdp::SdpProblem Retrace::base_problem(std::vector<sdp::HermitianVar>& vars, int* t_var,
                                      double radius) const {
    sdp::SdpProblem p;
    const int dd = d_ * d_;
    if (t_var) *t_var = p.add_variable("tau");
    const CMat id = CMat::Identity(d_, d_);
    for (int m = 0; m < k_; ++m) {
        vars.emplace_back(p, d_, "M" + std::to_string(m));
        const int b = p.add_block(d_, true);
        vars.back().place(p, b, 0, 0);
        // M_m + tau I >= 0: the cone is relaxed, the data equalities are not.
        if (t_var)
            p.add_term(b, *t_var, 0, 0, id);
        else
            p.add_constant(b, 0, 0, radius * id);
    }
    const double tol = settings_.prob_tolerance;
    const int boxed = tol > 0.0 ? static_cast<int>(rows_.size()) : 0;
    for (int r = 0; r < a_.rows() - boxed; ++r) {
        sdp::Equality e;
        e.rhs = b_(r);
        for (int m = 0; m < k_; ++m)
            for (int i = 0; i < dd; ++i) {
                const double v = a_(r, m * dd + i);
                if (v != 0.0) e.terms.push_back({vars[static_cast<size_t>(m)].basis()[static_cast<size_t>(i)].first, v});
            }
        p.add_equality(e);
    }
    if (boxed > 0) {
        // Diagonal block: tol - (a.y - b) >= 0 and tol + (a.y - b) >= 0 per data row.
        const int blk = p.add_block(2 * boxed, false);
        CMat c0 = CMat::Zero(2 * boxed, 2 * boxed);
        for (int r = 0; r < boxed; ++r) {
            c0(2 * r, 2 * r) = tol + rhs_[static_cast<size_t>(r)];
            c0(2 * r + 1, 2 * r + 1) = tol - rhs_[static_cast<size_t>(r)];
        }
        p.add_constant(blk, 0, 0, c0);
        for (int m = 0; m < k_; ++m)
            for (int i = 0; i < dd; ++i) {
                std::vector<sdp::Entry> entries;
                for (int r = 0; r < boxed; ++r) {
                    const double v = rows_[static_cast<size_t>(r)](m * dd + i);
                    if (v == 0.0) continue;
                    entries.push_back({2 * r, 2 * r, -v});
                    entries.push_back({2 * r + 1, 2 * r + 1, v});
                }
                if (!entries.empty())
                    p.add_term_entries(blk, vars[static_cast<size_t>(m)].basis()[static_cast<size_t>(i)].first,
                                       std::move(entries));
            }
    }
    return p;
}

std::optional<RMat> Retrace::data_weights(int m) const {
    if (m < 0 || m >= k_) throw ValidationError("retrace: outcome index out of range");
    if (settings_.prob_tolerance > 0.0) return std::nullopt;
    const int dd = d_ * d_;
    RVec obj = RVec::Zero(a_.cols());
    obj.segment(m * dd, dd) = c_coords_;
    const RVec w = a_.transpose().colPivHouseholderQr().solve(obj);
    if ((a_.transpose() * w - obj).norm() > settings_.rank_tol * std::max(1.0, obj.norm()))
        return std::nullopt;
    RMat out = RMat::Zero(n_states_, k_);
    for (size_t r = 0; r < rows_.size(); ++r)
        out(row_state_[r], row_outcome_[r]) += w(dd + static_cast<int>(r));
    return out;
}

RetraceInterval Retrace::interval(int m) const {
    if (m < 0 || m >= k_) throw ValidationError("retrace: outcome index out of range");
    if (!exact_.empty()) return exact_[static_cast<size_t>(m)];
    const int dd = d_ * d_;
    if (settings_.prob_tolerance <= 0.0) {
        // An objective spanned by the equality rows is constant over the feasible
        // set, so the interval collapses to one point.
        RVec obj = RVec::Zero(a_.cols());
        obj.segment(m * dd, dd) = c_coords_;
        const RVec w = a_.transpose().colPivHouseholderQr().solve(obj);
        if ((a_.transpose() * w - obj).norm() <= settings_.rank_tol * std::max(1.0, obj.norm())) {
            const double v = w.dot(b_);
            return {v, v};
        }
    }
    const double radius = relaxation_ + settings_.extra_slack + settings_.min_radius;
    const CMat c = 0.5 * (rho_.rho() * x_ + x_ * rho_.rho());
    double v[2];
    for (int side = 0; side < 2; ++side) {
        std::vector<sdp::HermitianVar> vars;
        sdp::SdpProblem p = base_problem(vars, nullptr, radius);
        vars[static_cast<size_t>(m)].add_objective_trace(p, c, side == 0 ? 1.0 : -1.0);
        const sdp::SdpSolution s = sdp::solve(p, settings_.sdp);
        if (s.status != sdp::Status::optimal)
            throw SolverError("retrace: interval problem ended with status " + sdp::to_string(s.status));
        v[side] = side == 0 ? s.objective_value : -s.objective_value;
    }
    return {std::min(v[0], v[1]), std::max(v[0], v[1])};
}

RetraceInterval bound_retrace_sdp(const std::vector<State>& states,
                                  const std::vector<RVec>& probs, int outcomes, const State& rho,
                                  const CMat& x, int target, const RetraceSettings& settings) {
    return Retrace(states, probs, outcomes, rho, x, settings).interval(target);
}

double ErrorEstimate::total_sq() const {
    double s = 0.0;
    for (const auto& e : per_observable) s += e.mid() * e.mid();
    return s;
}

double ErrorEstimate::total_sq_point() const {
    double s = 0.0;
    for (const auto& e : per_observable) s += e.sq_point;
    return s;
}

nlohmann::json ErrorEstimate::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : per_observable)
        arr.push_back({{"eps_min", e.eps_min},
                       {"eps_max", e.eps_max},
                       {"clipped", e.clipped},
                       {"relaxed", e.relaxed},
                       {"relaxation", e.relaxation},
                       {"sq_a", e.sq_a},
                       {"sq_b", e.sq_b},
                       {"sq_point", e.sq_point},
                       {"bias_corrected", e.bias_corrected},
                       {"skipped_outcomes", e.skipped_outcomes}});
    return {{"observables", arr}, {"total_sq", total_sq()}, {"total_sq_point", total_sq_point()}};
}

ErrorEstimate estimate_errors_from_probabilities(const std::vector<RVec>& probs, const State& rho,
                                                 const ObservableSet& x,
                                                 const RetraceSettings& settings,
                                                 long long shots) {
    const int n = x.size();
    if (static_cast<int>(probs.size()) != 1 + 2 * n)
        throw ValidationError("estimate_errors: expected " + std::to_string(1 + 2 * n) +
                              " probability rows");
    if (x.dim() != rho.dim()) throw ValidationError("estimate_errors: dimension mismatch");
    const int k = static_cast<int>(probs[0].size());
    const RVec& p1 = probs[0];
    ErrorEstimate out;
    for (int j = 0; j < n; ++j) {
        const ThreeStates ts = three_state_states(rho, x[j]);
        const Retrace rt({ts.rho1, ts.rho2, ts.rho3},
                         {p1, probs[static_cast<size_t>(1 + 2 * j)], probs[static_cast<size_t>(2 + 2 * j)]},
                         k, rho, x[j], settings);
        const double second = trace_prod(rho.rho(), x[j] * x[j]).real();
        const std::vector<const RVec*> rows = {&p1, &probs[static_cast<size_t>(1 + 2 * j)],
                                               &probs[static_cast<size_t>(2 + 2 * j)]};
        double sq_a = second, sq_b = second, point = second;
        bool corrected = shots > 0;
        ErrorInterval e;
        for (int m = 0; m < k; ++m) {
            if (p1(m) <= 0.0) {
                ++e.skipped_outcomes;
                continue;
            }
            const RetraceInterval a = rt.interval(m);
            sq_a -= a.min * a.min / p1(m);
            sq_b -= a.max * a.max / p1(m);
            const double am = 0.5 * (a.min + a.max), p = p1(m);
            point -= am * am / p;
            const std::optional<RMat> w = corrected ? rt.data_weights(m) : std::nullopt;
            if (!w) {
                corrected = false;
                continue;
            }
            // Delta method for E[a^2 / p] with independent multinomial rows.
            const double nn = static_cast<double>(shots);
            double var_a = 0.0;
            for (int l = 0; l < 3; ++l) {
                const RVec& pl = *rows[static_cast<size_t>(l)];
                const RVec wl = w->row(l).transpose();
                var_a += (wl.array().square() * pl.array()).sum() - std::pow(wl.dot(pl), 2);
            }
            var_a /= nn;
            const double cov = ((*w)(0, m) * p - w->row(0).dot(p1) * p) / nn;
            const double var_p = p * (1.0 - p) / nn;
            point += var_a / p - 2.0 * am * cov / (p * p) + am * am * var_p / (p * p * p);
        }
        e.sq_point = point;
        e.bias_corrected = corrected;
        if (!corrected) e.sq_point = 0.5 * (sq_a + sq_b);
        e.sq_a = sq_a;
        e.sq_b = sq_b;
        e.clipped = sq_a < 0.0 || sq_b < 0.0;
        const double ea = std::sqrt(std::max(0.0, sq_a)), eb = std::sqrt(std::max(0.0, sq_b));
        e.eps_min = std::min(ea, eb);
        e.eps_max = std::max(ea, eb);
        e.relaxed = rt.relaxed();
        e.relaxation = rt.relaxation();
        out.per_observable.push_back(e);
    }
    return out;
}

ErrorEstimate estimate_errors(const CountTable& counts, const State& rho, const ObservableSet& x,
                              const RetraceSettings& settings) {
    counts.validate();
    if (counts.observables() != x.size())
        throw ValidationError("estimate_errors: count table has " +
                              std::to_string(counts.observables()) + " observables, expected " +
                              std::to_string(x.size()));
    std::vector<RVec> probs;
    for (size_t r = 0; r < counts.counts.size(); ++r) probs.push_back(counts.frequencies(static_cast<int>(r)));
    return estimate_errors_from_probabilities(probs, rho, x, settings, counts.shots);
}

std::vector<RVec> exact_probabilities(const State& rho, const ObservableSet& x, const Povm& povm) {
    std::vector<RVec> out{probabilities_of(rho, povm)};
    for (int j = 0; j < x.size(); ++j) {
        const ThreeStates ts = three_state_states(rho, x[j]);
        out.push_back(probabilities_of(ts.rho2, povm));
        out.push_back(probabilities_of(ts.rho3, povm));
    }
    return out;
}

CountTable simulate_counts(const State& rho, const ObservableSet& x, const Povm& povm,
                           long long shots, std::uint64_t seed) {
    CountTable t;
    t.outcomes = povm.size();
    t.shots = shots;
    t.seed = seed;
    std::vector<State> rows{rho};
    t.labels.push_back("rho");
    for (int j = 0; j < x.size(); ++j) {
        const ThreeStates ts = three_state_states(rho, x[j]);
        const std::string tag = "X" + std::to_string(j + 1);
        rows.push_back(ts.rho2);
        t.labels.push_back(tag + " rho " + tag);
        rows.push_back(ts.rho3);
        t.labels.push_back("(I+" + tag + ") rho (I+" + tag + ")");
    }
    for (size_t r = 0; r < rows.size(); ++r)
        t.counts.push_back(sample_counts(rows[r], povm, shots, derive_seed(seed, r)));
    return t;
}

RVec direct_errors(const State& rho, const ObservableSet& x, const Povm& povm) {
    const ApproxMeasurement am(povm, optimal_values_for_povm(rho, x, povm));
    const CMat q = approx_error_matrix(rho, x, am);
    RVec e(x.size());
    for (int j = 0; j < x.size(); ++j) e(j) = std::sqrt(std::max(0.0, q(j, j).real()));
    return e;
}

RepeatSummary repeat_experiment(const State& rho, const ObservableSet& x, const Povm& povm,
                                long long shots, int repeats, std::uint64_t seed, int threads,
                                const RetraceSettings& settings) {
    if (repeats < 1) throw ValidationError("repeat_experiment: repeats must be >= 1");
    RepeatSummary out;
    out.totals.assign(static_cast<size_t>(repeats), 0.0);
    std::vector<double> widths(static_cast<size_t>(repeats), 0.0);
    parallel_for(repeats, threads, [&](int r) {
        const CountTable t = simulate_counts(rho, x, povm, shots, derive_seed(seed, static_cast<std::uint64_t>(r)));
        const ErrorEstimate e = estimate_errors(t, rho, x, settings);
        out.totals[static_cast<size_t>(r)] = e.total_sq_point();
        for (const auto& iv : e.per_observable)
            widths[static_cast<size_t>(r)] = std::max(widths[static_cast<size_t>(r)], iv.eps_max - iv.eps_min);
    });
    const Eigen::Map<const RVec> v(out.totals.data(), repeats);
    out.mean = v.mean();
    out.stddev = repeats > 1 ? std::sqrt((v.array() - out.mean).square().sum() / (repeats - 1)) : 0.0;
    out.stderr_mean = out.stddev / std::sqrt(static_cast<double>(repeats));
    out.max_width = *std::max_element(widths.begin(), widths.end());
    return out;
}

Povm experiment_povm(const State& rho, const ObservableSet& x, std::uint64_t seed) {
    const RMat w = RMat::Identity(x.size(), x.size());
    if (rho.is_pure()) return optimal_povm_pure(rho, x, w).measurement.povm;
    OracleSettings os;
    os.seed = seed;
    os.restarts = 8;
    const OracleResult r = brute_force_min_error(rho, x, w, os);
    if (!r.best_povm) throw SolverError("experiment_povm: local search returned no measurement");
    return *r.best_povm;
}

}  // namespace obstrade
