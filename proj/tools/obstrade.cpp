// Batch front end: problem JSON in, schema-tagged CSV (and JSON side files) out.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "obstrade/analytic.hpp"
#include "obstrade/e0.hpp"
#include "obstrade/experiment.hpp"
#include "obstrade/io.hpp"
#include "obstrade/metrology.hpp"
#include "obstrade/parallel.hpp"
#include "obstrade/sdp_selftest.hpp"

using namespace obstrade;
using io::fmt_num;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct RunConfig {
    std::string input;
    std::string output = "-";
    std::string side_output;  // POVM / counts JSON
    std::string summary;
    std::string methods;
    std::string sweep;
    std::uint64_t seed = 1;
    double tol_gap = -1;
    double tol_feas = -1;
    int restarts = 32;
    int outcomes = 0;
    long long shots = 2000;
    int repeats = 1;
    double prob_tol = 0.0;
    std::string counts_in;
    bool json_out = false;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

// Callers format the whole table first, so a failed run leaves no partial file.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << text;
}

sdp::Settings solver_settings(const RunConfig& c, const json& problem) {
    sdp::Settings s = io::sdp_settings_from_json(problem);
    if (c.tol_gap > 0) s.tol_gap = c.tol_gap;
    if (c.tol_feas > 0) s.tol_feas = c.tol_feas;
    return s;
}

// Sweep points as (label, problem) pairs. Without a sweep the label is empty.
std::vector<std::pair<std::string, json>> expand(const RunConfig& c, const json& base) {
    if (c.sweep.empty()) return {{"", base}};
    const io::SweepSpec spec = io::parse_sweep(c.sweep);
    std::vector<std::pair<std::string, json>> out;
    for (double v : spec.points()) {
        json p = base;
        io::apply_sweep_value(p, spec.name, v);
        out.emplace_back(fmt_num(v), std::move(p));
    }
    return out;
}

// Runs fn on every sweep point in the worker pool; results stay in sweep order.
template <class R>
std::vector<R> over_points(const std::vector<std::pair<std::string, json>>& pts,
                           const std::function<R(const json&, int)>& fn) {
    std::vector<std::optional<R>> slots(pts.size());
    parallel_for(static_cast<int>(pts.size()), default_threads(),
                 [&](int i) { slots[static_cast<size_t>(i)].emplace(fn(pts[static_cast<size_t>(i)].second, i)); });
    std::vector<R> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::vector<std::string> split_methods(const std::string& s, const std::string& fallback) {
    std::vector<std::string> out;
    std::stringstream ss(s.empty() ? fallback : s);
    for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) out.push_back(m);
    return out;
}

bool is_diagonal(const RMat& w) { return (w - RMat(w.diagonal().asDiagonal())).norm() == 0.0; }

BoundReport run_bound(const io::Problem& pr, const std::string& method, const sdp::Settings& s) {
    const int n = pr.x.size();
    const std::string m = method;
    if (m == "E0") {
        const E0Witness w = bound_e0(pr.rho, pr.x, pr.w, s);
        if (w.status != sdp::Status::optimal)
            throw SolverError("E0 solve ended with status " + sdp::to_string(w.status));
        return {"E0", w.value, io::witness_to_json(w)};
    }
    if (m == "Ozawa" || m == "Branciard" || m == "EA") {
        if (!is_diagonal(pr.w)) throw ValidationError(m + " takes diagonal weights only");
        if (n < 2) throw ValidationError(m + " needs at least two observables");
        const PairMethod pm = pair_method_from_string(m);
        if (n > 2) return pairwise_sum_bound(pr.rho, pr.x, pr.w, pm);
        if (pm == PairMethod::ea) return bound_mixed_pair_EA(pr.rho, pr.x[0], pr.x[1], pr.w(0, 0), pr.w(1, 1));
        const PairBoundTerms r = pm == PairMethod::ozawa
                                     ? bound_ozawa_pair(pr.rho, pr.x[0], pr.x[1], pr.w(0, 0), pr.w(1, 1))
                                     : bound_branciard_pair(pr.rho, pr.x[0], pr.x[1], pr.w(0, 0), pr.w(1, 1));
        return {m, r.value, {{"alpha", r.alpha}, {"beta", r.beta}}};
    }
    if (m == "closed") {
        if (n != 2 || !is_diagonal(pr.w)) throw ValidationError("closed needs two observables with diagonal weights");
        if (!pr.rho.is_pure()) throw ValidationError("closed needs a pure state");
        const PairBoundTerms r =
            bound_pure_pair_closed_form(pr.rho, pr.x[0], pr.x[1], pr.w(0, 0), pr.w(1, 1));
        return {"closed", r.value, {{"alpha", r.alpha}, {"beta", r.beta}, {"mu_plus", r.mu_plus}}};
    }
    if (m == "analytic") {
        if (!pr.w.isIdentity(0.0)) throw ValidationError("analytic takes unit weights only");
        if (pr.rho.dim() == 2) {
            const QubitBasis qb = qubit_optimal_basis(pr.rho, pr.x);
            BoundReport r = bound_multi_analytic(moment_data(pr.rho, pr.x, qb.basis));
            r.witness["basis"] = "qubit_optimal";
            return r;
        }
        BoundReport r = bound_multi_analytic_search(pr.rho, pr.x, BasisChoice::computational(pr.rho.dim()).vectors);
        r.witness["basis"] = "computational";
        return r;
    }
    throw ValidationError("unknown method \"" + method + "\" (E0, EA, Ozawa, Branciard, closed, analytic)");
}

int cmd_bound(const RunConfig& c) {
    const json base = read_json(c.input);
    const auto pts = expand(c, base);
    const auto methods = split_methods(c.methods, "E0,EA,Ozawa");
    using Rows = std::vector<BoundReport>;
    const auto res = over_points<Rows>(pts, [&](const json& j, int) {
        const io::Problem pr = io::problem_from_json(j);
        Rows rows;
        for (const auto& m : methods) rows.push_back(run_bound(pr, m, solver_settings(c, j)));
        return rows;
    });
    if (c.json_out) {
        json out = json::array();
        for (size_t i = 0; i < pts.size(); ++i) {
            json reps = json::array();
            for (const auto& r : res[i]) reps.push_back(io::bound_report_to_json(r));
            out.push_back({{"param", pts[i].first}, {"reports", reps}});
        }
        emit(c.output, out.dump(1) + "\n");
        return 0;
    }
    io::CsvTable t("obstrade.bound/1", {"param", "method", "value"});
    for (size_t i = 0; i < pts.size(); ++i)
        for (const auto& r : res[i]) t.add_row({pts[i].first, r.method, fmt_num(r.value)});
    std::ostringstream os;
    t.write(os);
    emit(c.output, os.str());
    return 0;
}

int cmd_measure_optimal(const RunConfig& c) {
    const json base = read_json(c.input);
    const auto pts = expand(c, base);
    const auto res = over_points<OptimalMeasurement>(pts, [&](const json& j, int) {
        const io::Problem pr = io::problem_from_json(j);
        if (!pr.rho.is_pure())
            throw ValidationError(
                "measure-optimal needs a pure state: no construction is known for mixed states and "
                "their bound can be unattainable (use `oracle` for a local search)");
        return optimal_povm_pure(pr.rho, pr.x, pr.w, std::nullopt, solver_settings(c, j));
    });
    io::CsvTable t("obstrade.measure-optimal/1", {"param", "achieved", "bound", "outcomes"});
    json povms = json::array();
    for (size_t i = 0; i < pts.size(); ++i) {
        t.add_row({pts[i].first, fmt_num(res[i].achieved), fmt_num(res[i].bound),
                   std::to_string(res[i].measurement.povm.size())});
        json m = io::measurement_to_json(res[i].measurement);
        m["param"] = pts[i].first;
        povms.push_back(m);
    }
    std::ostringstream os;
    t.write(os);
    emit(c.output, os.str());
    if (!c.side_output.empty()) emit(c.side_output, (pts.size() == 1 ? povms[0] : povms).dump(1) + "\n");
    return 0;
}

int cmd_metrology(const RunConfig& c) {
    const json base = read_json(c.input);
    const auto pts = expand(c, base);
    using Rows = std::vector<std::pair<std::string, double>>;
    const auto res = over_points<Rows>(pts, [&](const json& j, int) {
        const auto [fam, x] = family_from_json(j);
        const MetrologyReport rep = metrology_report(fam, x, solver_settings(c, j));
        if (rep.sdp_status != sdp::Status::optimal)
            throw SolverError("metrology SDP ended with status " + sdp::to_string(rep.sdp_status));
        Rows rows;
        const int n = fam.n_params;
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b)
                rows.emplace_back("F_Q[" + std::to_string(a) + "][" + std::to_string(b) + "]", rep.f_q(a, b));
        rows.emplace_back("analytic", rep.analytic);
        rows.emplace_back("sdp", rep.sdp);
        rows.emplace_back("pairwise_ea", rep.pairwise_ea);
        rows.emplace_back("pairwise_ceiling", rep.pairwise_ceiling);
        if (j.contains("povm")) {
            const Povm povm = io::povm_from_json(j.at("povm"));
            const RMat fc = cfi_matrix(fam, povm, x);
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b)
                    rows.emplace_back("F_C[" + std::to_string(a) + "][" + std::to_string(b) + "]", fc(a, b));
            // Tr(F_Q^-1 F_C), the quantity the bounds above limit.
            rows.emplace_back("trace_fq_inv_fc", rep.f_q.ldlt().solve(fc).trace());
        }
        return rows;
    });
    io::CsvTable t("obstrade.metrology/1", {"param", "quantity", "value"});
    for (size_t i = 0; i < pts.size(); ++i)
        for (const auto& [q, v] : res[i]) t.add_row({pts[i].first, q, fmt_num(v)});
    std::ostringstream os;
    t.write(os);
    emit(c.output, os.str());
    return 0;
}

struct ExperimentPoint {
    std::vector<ErrorEstimate> runs;
    RVec direct;
    double e0 = 0.0;
    std::optional<CountTable> first_counts;
};

int cmd_experiment(const RunConfig& c) {
    const json base = read_json(c.input);
    if (!c.counts_in.empty() && !c.sweep.empty())
        throw ValidationError("--counts-in takes a single problem, not a sweep");
    if (c.repeats < 1) throw ValidationError("--repeats must be >= 1");
    if (c.shots < 0) throw ValidationError("--shots must be >= 0 (0 means exact probabilities)");
    const auto pts = expand(c, base);
    RetraceSettings rs;
    rs.prob_tolerance = c.prob_tol;
    const auto res = over_points<ExperimentPoint>(pts, [&](const json& j, int i) {
        const io::Problem pr = io::problem_from_json(j);
        if (!pr.w.isIdentity(0.0)) throw ValidationError("experiment compares against E0 with unit weights");
        const std::uint64_t pseed = c.sweep.empty() ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(i));
        const Povm povm = pr.povm ? *pr.povm : experiment_povm(pr.rho, pr.x, pseed);
        ExperimentPoint out;
        out.direct = direct_errors(pr.rho, pr.x, povm);
        const E0Witness w = bound_e0(pr.rho, pr.x, solver_settings(c, j));
        if (w.status != sdp::Status::optimal) throw SolverError("E0 solve failed: " + sdp::to_string(w.status));
        out.e0 = w.value;
        if (!c.counts_in.empty()) {
            const CountTable t = CountTable::from_json(read_json(c.counts_in));
            out.runs.push_back(estimate_errors(t, pr.rho, pr.x, rs));
            out.first_counts = t;
        } else if (c.shots == 0) {
            out.runs.push_back(estimate_errors_from_probabilities(exact_probabilities(pr.rho, pr.x, povm),
                                                                  pr.rho, pr.x, rs));
        } else {
            for (int r = 0; r < c.repeats; ++r) {
                const CountTable t =
                    simulate_counts(pr.rho, pr.x, povm, c.shots, derive_seed(pseed, static_cast<std::uint64_t>(r)));
                out.runs.push_back(estimate_errors(t, pr.rho, pr.x, rs));
                if (r == 0) out.first_counts = t;
            }
        }
        return out;
    });

    io::CsvTable t("obstrade.experiment/1", {"param", "repeat", "observable", "eps_min", "eps_max",
                                             "sq_point", "eps_direct", "clipped", "relaxed"});
    io::CsvTable s("obstrade.experiment-summary/1",
                   {"param", "e0", "direct_total", "mean_total", "stderr", "repeats", "max_width"});
    json counts = json::array();
    for (size_t i = 0; i < pts.size(); ++i) {
        const ExperimentPoint& p = res[i];
        double sum = 0.0, sum2 = 0.0, width = 0.0;
        for (size_t r = 0; r < p.runs.size(); ++r) {
            const auto& iv = p.runs[r].per_observable;
            for (size_t j = 0; j < iv.size(); ++j) {
                t.add_row({pts[i].first, std::to_string(r), std::to_string(j), fmt_num(iv[j].eps_min),
                           fmt_num(iv[j].eps_max), fmt_num(iv[j].sq_point),
                           fmt_num(p.direct(static_cast<Eigen::Index>(j))), iv[j].clipped ? "1" : "0",
                           iv[j].relaxed ? "1" : "0"});
                width = std::max(width, iv[j].eps_max - iv[j].eps_min);
            }
            const double tot = p.runs[r].total_sq_point();
            sum += tot;
            sum2 += tot * tot;
        }
        const double k = static_cast<double>(p.runs.size());
        const double mean = sum / k;
        const double sd = k > 1 ? std::sqrt(std::max(0.0, (sum2 - k * mean * mean) / (k - 1))) : 0.0;
        s.add_row({pts[i].first, fmt_num(p.e0), fmt_num(p.direct.squaredNorm()), fmt_num(mean),
                   fmt_num(sd / std::sqrt(k)), std::to_string(p.runs.size()), fmt_num(width)});
        if (p.first_counts) {
            json cj = p.first_counts->to_json();
            cj["param"] = pts[i].first;
            counts.push_back(cj);
        }
    }
    std::ostringstream os;
    t.write(os);
    emit(c.output, os.str());
    if (!c.summary.empty()) {
        std::ostringstream ss;
        s.write(ss);
        emit(c.summary, ss.str());
    }
    if (!c.side_output.empty() && !counts.empty())
        emit(c.side_output, (counts.size() == 1 ? counts[0] : counts).dump(1) + "\n");
    return 0;
}

int cmd_oracle(const RunConfig& c) {
    const json base = read_json(c.input);
    const auto pts = expand(c, base);
    struct Out {
        OracleResult r;
        double e0 = 0.0;
    };
    const auto res = over_points<Out>(pts, [&](const json& j, int i) {
        const io::Problem pr = io::problem_from_json(j);
        OracleSettings os;
        os.restarts = c.restarts;
        os.outcomes = c.outcomes;
        os.seed = c.sweep.empty() ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(i));
        if (os.restarts < 1) throw ValidationError("--restarts must be >= 1");
        const E0Witness w = bound_e0(pr.rho, pr.x, pr.w, solver_settings(c, j));
        if (w.status != sdp::Status::optimal) throw SolverError("E0 solve failed: " + sdp::to_string(w.status));
        return Out{brute_force_min_error(pr.rho, pr.x, pr.w, os), w.value};
    });
    io::CsvTable t("obstrade.oracle/1", {"param", "best_error", "e0", "gap", "restarts"});
    json povms = json::array();
    for (size_t i = 0; i < pts.size(); ++i) {
        const Out& o = res[i];
        t.add_row({pts[i].first, fmt_num(o.r.best_error), fmt_num(o.e0), fmt_num(o.r.best_error - o.e0),
                   std::to_string(o.r.restarts_used)});
        if (o.r.best_povm) {
            json m = io::measurement_to_json(ApproxMeasurement(*o.r.best_povm, o.r.best_assignment));
            m["param"] = pts[i].first;
            povms.push_back(m);
        }
    }
    std::ostringstream os;
    t.write(os);
    emit(c.output, os.str());
    if (!c.side_output.empty() && !povms.empty())
        emit(c.side_output, (povms.size() == 1 ? povms[0] : povms).dump(1) + "\n");
    return 0;
}

int cmd_sdp_selftest(const RunConfig& c) {
    if (!c.input.empty()) {
        const json j = read_json(c.input);
        const sdp::SdpProblem p = io::sdp_problem_from_json(j);
        const sdp::SdpSolution s = sdp::solve(p, solver_settings(c, j));
        json out = io::sdp_solution_to_json(s);
        const sdp::Residuals r = sdp::verify(s, p);
        out["verified_residuals"] = {{"primal", r.primal}, {"dual", r.dual}, {"gap", r.gap}};
        emit(c.output, out.dump(1) + "\n");
        return s.status == sdp::Status::optimal ? 0 : kExitSolver;
    }
    const auto checks = sdp::self_test(c.seed);
    io::CsvTable t("obstrade.sdp-selftest/1", {"check", "value", "reference", "tol", "pass"});
    bool ok = true;
    for (const auto& ch : checks) {
        t.add_row({ch.name, fmt_num(ch.value), fmt_num(ch.reference), fmt_num(ch.tol), ch.pass ? "1" : "0"});
        ok = ok && ch.pass;
    }
    std::ostringstream os;
    t.write(os);
    emit(c.output, os.str());
    return ok ? 0 : kExitSolver;
}

void add_common(CLI::App* sub, RunConfig& c, bool input_required) {
    auto* in = sub->add_option("--input,-i", c.input, "Problem JSON");
    if (input_required) in->required()->check(CLI::ExistingFile);
    sub->add_option("--output,-o", c.output, "Result table path ('-' for stdout)");
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--tol-gap", c.tol_gap, "SDP relative gap tolerance");
    sub->add_option("--tol-feas", c.tol_feas, "SDP feasibility tolerance");
}

void add_sweep(CLI::App* sub, RunConfig& c) {
    sub->add_option("--sweep", c.sweep,
                    "name:start:stop:steps over a numeric field of the problem (name or name[i])");
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("obstrade"));
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"Measurement-uncertainty and multiparameter-metrology bounds"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
    RunConfig c;

    auto* bound = app.add_subcommand("bound", "Error-tradeoff bounds per sweep point.\n"
                                              "CSV columns: param,method,value");
    add_common(bound, c, true);
    add_sweep(bound, c);
    bound->add_option("--method", c.methods, "Comma list of E0,EA,Ozawa,Branciard,closed,analytic");
    bound->add_flag("--json", c.json_out, "Emit BoundReport JSON with witnesses instead of CSV");

    auto* meas = app.add_subcommand("measure-optimal", "Optimal POVM for a pure state.\n"
                                                       "CSV columns: param,achieved,bound,outcomes");
    add_common(meas, c, true);
    add_sweep(meas, c);
    meas->add_option("--povm-out", c.side_output, "Write the POVM and value assignment as JSON");

    auto* metro = app.add_subcommand("metrology", "QFI and precision bounds for a parametrized family.\n"
                                                  "CSV columns: param,quantity,value");
    add_common(metro, c, true);
    add_sweep(metro, c);

    auto* exper = app.add_subcommand(
        "experiment", "Simulated 3-state run with error intervals.\n"
                      "CSV columns: param,repeat,observable,eps_min,eps_max,sq_point,eps_direct,clipped,relaxed\n"
                      "Summary columns: param,e0,direct_total,mean_total,stderr,repeats,max_width");
    add_common(exper, c, true);
    add_sweep(exper, c);
    exper->add_option("--shots", c.shots, "Shots per state; 0 uses exact probabilities");
    exper->add_option("--repeats", c.repeats, "Independent repetitions per point");
    exper->add_option("--prob-tol", c.prob_tol, "Accept |Tr(rho_l M_m) - p_l(m)| up to this value");
    exper->add_option("--counts-in", c.counts_in, "Use an existing count table instead of simulating")
        ->check(CLI::ExistingFile);
    exper->add_option("--counts-out", c.side_output, "Write the (first) count table as JSON");
    exper->add_option("--summary", c.summary, "Write the per-point summary CSV here");

    auto* oracle = app.add_subcommand("oracle", "Local search for the best POVM.\n"
                                                "CSV columns: param,best_error,e0,gap,restarts");
    add_common(oracle, c, true);
    add_sweep(oracle, c);
    oracle->add_option("--restarts", c.restarts, "Random restarts");
    oracle->add_option("--outcomes", c.outcomes, "POVM outcomes (0 selects n + 2)");
    oracle->add_option("--povm-out", c.side_output, "Write the best POVM as JSON");

    auto* self = app.add_subcommand("sdp-selftest", "Solver checks, or solve an SDP problem JSON given with --input.\n"
                                                    "CSV columns: check,value,reference,tol,pass");
    add_common(self, c, false);
    self->get_option("--input")->check(CLI::ExistingFile);

    // --method is documented on bound only; the other commands accept and ignore it.
    for (auto* sub : {meas, metro, exper, oracle, self}) sub->add_option("--method", c.methods)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    if (verbose) spdlog::set_level(spdlog::level::info);

    try {
        if (*bound) return cmd_bound(c);
        if (*meas) return cmd_measure_optimal(c);
        if (*metro) return cmd_metrology(c);
        if (*exper) return cmd_experiment(c);
        if (*oracle) return cmd_oracle(c);
        if (*self) return cmd_sdp_selftest(c);
    } catch (const ValidationError& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitValidation;
    } catch (const SolverError& e) {
        spdlog::error("solver failure: {}", e.what());
        return kExitSolver;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitValidation;
    }
    return 0;
}
