#include "obstrade/io.hpp"

#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>

#include "obstrade/instances.hpp"

namespace obstrade::io {

namespace {

const json& need(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key))
        throw ValidationError(std::string(what) + ": missing \"" + key + "\"");
    return j.at(key);
}

std::vector<std::vector<double>> rows_of(const json& j, const char* what) {
    try {
        return j.get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
        throw ValidationError(std::string(what) + ": expected an array of numeric rows");
    }
}

double number(const json& j, const char* what) {
    if (!j.is_number()) throw ValidationError(std::string(what) + ": expected a number");
    return j.get<double>();
}

}  // namespace

json matrix_to_json(const CMat& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json rr = json::array(), ri = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            rr.push_back(m(r, c).real());
            ri.push_back(m(r, c).imag());
        }
        re.push_back(rr);
        im.push_back(ri);
    }
    return {{"dim", m.rows()}, {"re", re}, {"im", im}};
}

CMat matrix_from_json(const json& j) {
    const json& dj = need(j, "dim", "matrix");
    if (!dj.is_number_integer() || dj.get<int>() < 1)
        throw ValidationError("matrix: \"dim\" must be a positive integer");
    const int d = dj.get<int>();
    const auto re = rows_of(need(j, "re", "matrix"), "matrix re");
    std::vector<std::vector<double>> im;
    if (j.contains("im")) im = rows_of(j.at("im"), "matrix im");
    auto check = [d](const std::vector<std::vector<double>>& a, const char* part) {
        if (static_cast<int>(a.size()) != d)
            throw ValidationError(std::string("matrix: ") + part + " has wrong row count");
        for (const auto& row : a)
            if (static_cast<int>(row.size()) != d)
                throw ValidationError(std::string("matrix: ") + part + " has wrong row length");
    };
    check(re, "re");
    if (!im.empty()) check(im, "im");
    CMat m(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            m(r, c) = cplx(re[static_cast<size_t>(r)][static_cast<size_t>(c)],
                           im.empty() ? 0.0 : im[static_cast<size_t>(r)][static_cast<size_t>(c)]);
    return m;
}

json real_matrix_to_json(const RMat& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

RMat real_matrix_from_json(const json& j) {
    const auto rows = rows_of(j, "real matrix");
    if (rows.empty()) return RMat(0, 0);
    RMat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw ValidationError("real matrix: ragged rows");
        for (size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

json state_to_json(const State& s) { return {{"rho", matrix_to_json(s.rho())}}; }

State state_from_json(const json& j) {
    if (j.is_object() && j.contains("ket")) {
        const json& k = j.at("ket");
        std::vector<double> re, im;
        try {
            re = need(k, "re", "ket").get<std::vector<double>>();
            if (k.contains("im")) im = k.at("im").get<std::vector<double>>();
        } catch (const json::exception&) {
            throw ValidationError("ket: expected numeric arrays");
        }
        if (re.empty() || (!im.empty() && im.size() != re.size()))
            throw ValidationError("ket: re/im length mismatch");
        CVec v(static_cast<Eigen::Index>(re.size()));
        for (size_t i = 0; i < re.size(); ++i)
            v(static_cast<Eigen::Index>(i)) = cplx(re[i], im.empty() ? 0.0 : im[i]);
        if (std::abs(v.norm() - 1.0) > 1e-10) throw ValidationError("ket: not normalized");
        return State::pure(v);
    }
    return State(matrix_from_json(need(j, "rho", "state")));
}

json observables_to_json(const ObservableSet& x) {
    json out = json::array();
    for (const CMat& m : x.ops()) out.push_back(matrix_to_json(m));
    return out;
}

ObservableSet observables_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ValidationError("observables: expected a nonempty array");
    std::vector<CMat> ops;
    for (const json& m : j) ops.push_back(matrix_from_json(m));
    return ObservableSet(std::move(ops));
}

json povm_to_json(const Povm& p) {
    json outs = json::array();
    for (const CMat& m : p.outcomes()) outs.push_back(matrix_to_json(m));
    json out = {{"outcomes", outs}};
    if (!p.labels().empty()) out["labels"] = p.labels();
    return out;
}

Povm povm_from_json(const json& j) {
    const json& outs = need(j, "outcomes", "povm");
    if (!outs.is_array() || outs.empty()) throw ValidationError("povm: no outcomes");
    std::vector<CMat> ms;
    for (const json& m : outs) ms.push_back(matrix_from_json(m));
    std::vector<std::string> labels;
    if (j.contains("labels")) {
        try {
            labels = j.at("labels").get<std::vector<std::string>>();
        } catch (const json::exception&) {
            throw ValidationError("povm: labels must be strings");
        }
    }
    return Povm(std::move(ms), std::move(labels));
}

json measurement_to_json(const ApproxMeasurement& m) {
    json out = povm_to_json(m.povm);
    out["values"] = real_matrix_to_json(m.values);
    return out;
}

json bound_report_to_json(const BoundReport& r) {
    return {{"method", r.method}, {"value", r.value}, {"witness", r.witness}};
}

json witness_to_json(const E0Witness& w) {
    json r = json::array(), s = json::array();
    for (const CMat& m : w.r_ops) r.push_back(matrix_to_json(m));
    for (const auto& row : w.s_blocks) {
        json jr = json::array();
        for (const CMat& m : row) jr.push_back(matrix_to_json(m));
        s.push_back(jr);
    }
    return {{"value", w.value},
            {"dual_value", w.dual_value},
            {"status", sdp::to_string(w.status)},
            {"iterations", w.iterations},
            {"residuals",
             {{"primal", w.residuals.primal}, {"dual", w.residuals.dual}, {"gap", w.residuals.gap}}},
            {"r_ops", r},
            {"s_blocks", s}};
}

json sdp_problem_to_json(const sdp::SdpProblem& p) {
    json vars = json::array(), blocks = json::array(), eqs = json::array();
    for (int i = 0; i < p.num_variables(); ++i) vars.push_back(p.name(i));
    for (int b = 0; b < p.num_blocks(); ++b) {
        const sdp::LmiBlock& blk = p.block(b);
        json terms = json::array();
        for (const auto& [var, entries] : blk.terms) {
            json es = json::array();
            for (const sdp::Entry& e : entries)
                es.push_back({e.row, e.col, e.value.real(), e.value.imag()});
            terms.push_back({{"var", var}, {"entries", es}});
        }
        blocks.push_back({{"dim", blk.dim},
                          {"complex", blk.complex},
                          {"constant", matrix_to_json(blk.constant)},
                          {"terms", terms}});
    }
    for (const sdp::Equality& e : p.equalities()) {
        json ts = json::array();
        for (const sdp::LinearTerm& t : e.terms) ts.push_back({t.var, t.coeff});
        eqs.push_back({{"terms", ts}, {"rhs", e.rhs}});
    }
    std::vector<double> c(p.objective().data(), p.objective().data() + p.objective().size());
    return {{"schema", "obstrade.sdp/1"},
            {"variables", vars},
            {"objective", c},
            {"objective_constant", p.objective_constant()},
            {"blocks", blocks},
            {"equalities", eqs}};
}

sdp::SdpProblem sdp_problem_from_json(const json& j) {
    sdp::SdpProblem p;
    try {
        for (const json& v : need(j, "variables", "sdp problem")) p.add_variable(v.get<std::string>());
        const auto c = need(j, "objective", "sdp problem").get<std::vector<double>>();
        if (static_cast<int>(c.size()) != p.num_variables())
            throw ValidationError("sdp problem: objective length differs from variable count");
        for (size_t i = 0; i < c.size(); ++i) p.set_objective(static_cast<int>(i), c[i]);
        if (j.contains("objective_constant"))
            p.set_objective_constant(j.at("objective_constant").get<double>());
        for (const json& bj : need(j, "blocks", "sdp problem")) {
            const int dim = need(bj, "dim", "sdp block").get<int>();
            if (dim < 1) throw ValidationError("sdp block: dim must be positive");
            const int b = p.add_block(dim, bj.value("complex", true));
            if (bj.contains("constant")) {
                const CMat c0 = matrix_from_json(bj.at("constant"));
                if (c0.rows() != dim) throw ValidationError("sdp block: constant has wrong size");
                p.add_constant(b, 0, 0, c0);
            }
            for (const json& tj : bj.value("terms", json::array())) {
                const int var = need(tj, "var", "sdp term").get<int>();
                if (var < 0 || var >= p.num_variables())
                    throw ValidationError("sdp term: variable index out of range");
                std::vector<sdp::Entry> es;
                for (const json& e : need(tj, "entries", "sdp term")) {
                    if (!e.is_array() || e.size() != 4)
                        throw ValidationError("sdp term: entries are [row, col, re, im]");
                    es.push_back({e[0].get<int>(), e[1].get<int>(),
                                  cplx(e[2].get<double>(), e[3].get<double>())});
                }
                p.add_term_entries(b, var, std::move(es));
            }
        }
        for (const json& ej : j.value("equalities", json::array())) {
            sdp::Equality eq;
            for (const json& t : need(ej, "terms", "sdp equality")) {
                if (!t.is_array() || t.size() != 2)
                    throw ValidationError("sdp equality: terms are [var, coeff]");
                eq.terms.push_back({t[0].get<int>(), t[1].get<double>()});
            }
            eq.rhs = ej.value("rhs", 0.0);
            p.add_equality(std::move(eq));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("sdp problem: ") + e.what());
    }
    p.validate();
    return p;
}

json sdp_solution_to_json(const sdp::SdpSolution& s) {
    std::vector<double> y(s.y.data(), s.y.data() + s.y.size());
    return {{"status", sdp::to_string(s.status)},
            {"objective_value", s.objective_value},
            {"dual_objective", s.dual_objective},
            {"y", y},
            {"iterations", s.iterations},
            {"residuals",
             {{"primal", s.residuals.primal}, {"dual", s.residuals.dual}, {"gap", s.residuals.gap}}},
            {"message", s.message}};
}

sdp::Settings sdp_settings_from_json(const json& j, sdp::Settings base) {
    if (!j.is_object() || !j.contains("settings")) return base;
    const json& s = j.at("settings");
    if (s.contains("tol_feas")) base.tol_feas = number(s.at("tol_feas"), "settings.tol_feas");
    if (s.contains("tol_gap")) base.tol_gap = number(s.at("tol_gap"), "settings.tol_gap");
    if (s.contains("max_iters")) base.max_iters = s.at("max_iters").get<int>();
    if (base.tol_feas <= 0 || base.tol_gap <= 0 || base.max_iters < 1)
        throw ValidationError("settings: tolerances must be positive, max_iters >= 1");
    return base;
}

Problem problem_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("problem: expected a JSON object");
    std::optional<State> rho;
    std::optional<ObservableSet> x;
    if (j.contains("instance")) {
        const std::string name = j.at("instance").get<std::string>();
        if (name == "spin1") {
            const double p = number(need(j, "p", "spin1"), "spin1 p");
            if (p < 0 || p > 1) throw ValidationError("spin1: p must lie in [0, 1]");
            rho = instances::spin1_state(p);
            x = instances::spin1_observables();
        } else if (name == "qubit_pure") {
            rho = State::pure(instances::rotated_qubit(number(need(j, "theta", "qubit_pure"), "theta")));
            x = instances::half_paulis();
        } else if (name == "qubit_mixed") {
            const double p = number(need(j, "p", "qubit_mixed"), "qubit_mixed p");
            if (p < 0 || p > 1) throw ValidationError("qubit_mixed: p must lie in [0, 1]");
            rho = instances::diagonal_qubit(p);
            x = instances::half_paulis();
        } else if (name == "gap4") {
            rho = instances::gap4_state(number(need(j, "p", "gap4"), "gap4 p"));
            x = instances::gap4_observables();
        } else {
            throw ValidationError("problem: unknown instance \"" + name + "\"");
        }
    }
    if (j.contains("state")) rho = state_from_json(j.at("state"));
    if (j.contains("observables")) x = observables_from_json(j.at("observables"));
    if (!rho || !x) throw ValidationError("problem: needs \"instance\" or both \"state\" and \"observables\"");
    if (j.contains("subset")) {
        std::vector<int> idx;
        try {
            idx = j.at("subset").get<std::vector<int>>();
        } catch (const json::exception&) {
            throw ValidationError("problem: subset must be integer indices");
        }
        for (int i : idx)
            if (i < 0 || i >= x->size()) throw ValidationError("problem: subset index out of range");
        x = x->subset(idx);
    }
    if (x->dim() != rho->dim()) throw ValidationError("problem: state and observable dimensions differ");
    const int n = x->size();
    RMat w = RMat::Identity(n, n);
    if (j.contains("weights")) {
        const json& wj = j.at("weights");
        if (wj.is_array() && !wj.empty() && wj[0].is_number()) {
            const auto diag = wj.get<std::vector<double>>();
            if (static_cast<int>(diag.size()) != n) throw ValidationError("problem: weights length != n");
            w = RMat::Zero(n, n);
            for (int i = 0; i < n; ++i) w(i, i) = diag[static_cast<size_t>(i)];
        } else {
            w = real_matrix_from_json(wj);
        }
        validate_weights(w, n);
    }
    std::optional<Povm> povm;
    if (j.contains("povm")) {
        povm = povm_from_json(j.at("povm"));
        if (povm->dim() != rho->dim()) throw ValidationError("problem: POVM dimension differs from state");
    }
    return Problem{*rho, *x, w, povm};
}

std::vector<double> SweepSpec::points() const {
    std::vector<double> out;
    for (int i = 0; i < steps; ++i)
        out.push_back(steps == 1 ? start : start + (stop - start) * i / (steps - 1));
    return out;
}

SweepSpec parse_sweep(const std::string& s) {
    static const std::regex re(R"(^([A-Za-z_][A-Za-z0-9_]*(?:\[\d+\])?):([^:]+):([^:]+):(\d+)$)");
    std::smatch m;
    if (!std::regex_match(s, m, re))
        throw ValidationError("sweep: expected name:start:stop:steps, got \"" + s + "\"");
    SweepSpec out;
    out.name = m[1];
    try {
        size_t used = 0;
        out.start = std::stod(m[2], &used);
        if (used != static_cast<size_t>(m[2].length())) throw std::invalid_argument("start");
        out.stop = std::stod(m[3], &used);
        if (used != static_cast<size_t>(m[3].length())) throw std::invalid_argument("stop");
        out.steps = std::stoi(m[4]);
    } catch (const std::exception&) {
        throw ValidationError("sweep: bad number in \"" + s + "\"");
    }
    if (out.steps < 1) throw ValidationError("sweep: steps must be >= 1");
    return out;
}

void apply_sweep_value(json& problem, const std::string& name, double value) {
    static const std::regex re(R"(^([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?$)");
    std::smatch m;
    if (!std::regex_match(name, m, re)) throw ValidationError("sweep: bad parameter name " + name);
    const std::string key = m[1];
    if (!problem.is_object() || !problem.contains(key))
        throw ValidationError("sweep: problem has no field \"" + key + "\"");
    json& field = problem[key];
    if (m[2].matched) {
        const size_t i = std::stoul(m[2]);
        if (!field.is_array() || i >= field.size() || !field[i].is_number())
            throw ValidationError("sweep: \"" + name + "\" is not a numeric array entry");
        field[i] = value;
    } else {
        if (!field.is_number()) throw ValidationError("sweep: \"" + key + "\" is not numeric");
        field = value;
    }
}

std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

CsvTable::CsvTable(std::string schema, std::vector<std::string> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("csv: row width mismatch");
    rows_.push_back(std::move(cells));
}

void CsvTable::write(std::ostream& os) const {
    auto line = [&os](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    os << "# schema: " << schema_ << '\n';
    line(columns_);
    for (const auto& r : rows_) line(r);
}

}  // namespace obstrade::io
