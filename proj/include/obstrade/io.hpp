#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "obstrade/analytic.hpp"
#include "obstrade/e0.hpp"
#include "obstrade/quantum.hpp"
#include "obstrade/sdp.hpp"

namespace obstrade::io {

using nlohmann::json;

// {"dim": d, "re": [[...]], "im": [[...]]}, row-major. "im" may be omitted on input.
json matrix_to_json(const CMat& m);
CMat matrix_from_json(const json& j);
json real_matrix_to_json(const RMat& m);
RMat real_matrix_from_json(const json& j);

// {"rho": matrix} or, on input only, {"ket": {"re": [...], "im": [...]}}.
json state_to_json(const State& s);
State state_from_json(const json& j);
json observables_to_json(const ObservableSet& x);
ObservableSet observables_from_json(const json& j);
// {"outcomes": [matrix, ...], "labels": [...]}; validated on load.
json povm_to_json(const Povm& p);
Povm povm_from_json(const json& j);
// POVM plus "values": n x K.
json measurement_to_json(const ApproxMeasurement& m);

json bound_report_to_json(const BoundReport& r);
json witness_to_json(const E0Witness& w);

json sdp_problem_to_json(const sdp::SdpProblem& p);
sdp::SdpProblem sdp_problem_from_json(const json& j);
json sdp_solution_to_json(const sdp::SdpSolution& s);
// Solver fields of an optional "settings" object override `base`.
sdp::Settings sdp_settings_from_json(const json& j, sdp::Settings base = {});

// Input of one bound or experiment run, given either explicitly
// ("state", "observables") or a named instance with its parameter:
//   spin1 (p), qubit_pure (theta), qubit_mixed (p), gap4 (p).
// "subset" picks observables by index. "weights" is a matrix or its diagonal.
// "povm" is optional.
struct Problem {
    State rho;
    ObservableSet x;
    RMat w;
    std::optional<Povm> povm;
};
Problem problem_from_json(const json& j);

// name:start:stop:steps, points evenly spaced with both ends included.
struct SweepSpec {
    std::string name;
    double start = 0.0;
    double stop = 0.0;
    int steps = 1;
    std::vector<double> points() const;
};
SweepSpec parse_sweep(const std::string& s);
// Overwrites the numeric field `name` or `name[i]`; the field must already exist.
void apply_sweep_value(json& problem, const std::string& name, double value);

// Numbers at 12 significant digits.
std::string fmt_num(double v);

// CSV with a "# schema: <id>" first line. Rows are written in insertion order.
class CsvTable {
public:
    CsvTable(std::string schema, std::vector<std::string> columns);
    void add_row(std::vector<std::string> cells);
    size_t size() const { return rows_.size(); }
    void write(std::ostream& os) const;

private:
    std::string schema_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace obstrade::io
