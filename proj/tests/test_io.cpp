#include <gtest/gtest.h>

#include <sstream>

#include "obstrade/io.hpp"
#include "obstrade/instances.hpp"
#include "obstrade/sdp_selftest.hpp"
#include "test_util.hpp"

using namespace obstrade;
using nlohmann::json;

TEST(MatrixJson, RoundTripIsBitExact) {
    std::mt19937_64 rng(1);
    const CMat m = testutil::random_complex(3, 3, rng);
    const json j = json::parse(io::matrix_to_json(m).dump());
    EXPECT_EQ(j.at("dim"), 3);
    const CMat back = io::matrix_from_json(j);
    EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MatrixJson, ImaginaryPartOptionalAndShapesChecked) {
    const CMat m = io::matrix_from_json(json::parse(R"({"dim":2,"re":[[1,0],[0,2]]})"));
    EXPECT_EQ(m(1, 1), cplx(2, 0));
    EXPECT_THROW(io::matrix_from_json(json::parse(R"({"dim":2,"re":[[1,0]]})")), ValidationError);
    EXPECT_THROW(io::matrix_from_json(json::parse(R"({"dim":2,"re":[[1,0],[0]]})")), ValidationError);
    EXPECT_THROW(io::matrix_from_json(json::parse(R"({"re":[[1]]})")), ValidationError);
    EXPECT_THROW(io::matrix_from_json(json::parse(R"({"dim":1,"re":[["a"]]})")), ValidationError);
}

TEST(StateJson, KetAndDensityForms) {
    const State s = io::state_from_json(json::parse(R"({"ket":{"re":[0.6,0],"im":[0,0.8]}})"));
    EXPECT_TRUE(s.is_pure());
    EXPECT_NEAR(s.rho()(1, 1).real(), 0.64, 1e-15);
    const State back = io::state_from_json(io::state_to_json(s));
    EXPECT_LT((back.rho() - s.rho()).norm(), 1e-15);
    EXPECT_THROW(io::state_from_json(json::parse(R"({"ket":{"re":[1,1]}})")), ValidationError);
    EXPECT_THROW(io::state_from_json(json::parse(R"({"rho":{"dim":1,"re":[[2]]}})")), ValidationError);
}

TEST(PovmJson, RoundTripAndValidation) {
    const Povm z({CMat(CVec::Unit(2, 0) * CVec::Unit(2, 0).adjoint()),
                  CMat(CVec::Unit(2, 1) * CVec::Unit(2, 1).adjoint())},
                 {"up", "down"});
    const Povm back = io::povm_from_json(io::povm_to_json(z));
    EXPECT_EQ(back.labels(), z.labels());
    EXPECT_EQ(back[1], z[1]);
    json bad = io::povm_to_json(z);
    bad["outcomes"].erase(1);
    EXPECT_THROW(io::povm_from_json(bad), ValidationError);
}

TEST(SdpJson, RoundTripSolvesToSameOptimum) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 5; ++t) {
        const sdp::SdpProblem p = sdp::random_feasible_problem(rng, t % 2 == 0);
        const sdp::SdpProblem q = io::sdp_problem_from_json(json::parse(io::sdp_problem_to_json(p).dump()));
        ASSERT_EQ(q.num_variables(), p.num_variables());
        ASSERT_EQ(q.num_blocks(), p.num_blocks());
        EXPECT_EQ(q.block(0).complex, p.block(0).complex);
        EXPECT_EQ(sdp::solve(q).objective_value, sdp::solve(p).objective_value);
    }
    const sdp::SdpProblem lm = sdp::lambda_min_problem(instances::half_paulis()[2]);
    const sdp::SdpProblem back = io::sdp_problem_from_json(io::sdp_problem_to_json(lm));
    EXPECT_EQ(back.equalities().size(), 1u);
    EXPECT_NEAR(sdp::solve(back).objective_value, -0.5, 1e-7);
}

TEST(SdpJson, RejectsMalformedProblems) {
    json j = io::sdp_problem_to_json(sdp::lambda_max_problem(CMat::Identity(2, 2)));
    j["objective"] = json::array();
    EXPECT_THROW(io::sdp_problem_from_json(j), ValidationError);
    j = io::sdp_problem_to_json(sdp::lambda_max_problem(CMat::Identity(2, 2)));
    j["blocks"][0]["terms"][0]["var"] = 7;
    EXPECT_THROW(io::sdp_problem_from_json(j), ValidationError);
    j = io::sdp_problem_to_json(sdp::lambda_max_problem(CMat::Identity(2, 2)));
    j["blocks"][0]["terms"][0]["entries"].push_back({0, 1, 1.0, 0.0});  // lower triangle missing
    EXPECT_THROW(io::sdp_problem_from_json(j), ValidationError);
}

TEST(SdpJson, SettingsOverride) {
    const sdp::Settings s =
        io::sdp_settings_from_json(json::parse(R"({"settings":{"tol_gap":1e-9,"max_iters":50}})"));
    EXPECT_EQ(s.tol_gap, 1e-9);
    EXPECT_EQ(s.max_iters, 50);
    EXPECT_EQ(s.tol_feas, sdp::Settings{}.tol_feas);
    EXPECT_THROW(io::sdp_settings_from_json(json::parse(R"({"settings":{"tol_gap":-1}})")), ValidationError);
}

TEST(ProblemJson, NamedInstancesSubsetAndWeights) {
    const io::Problem p = io::problem_from_json(
        json::parse(R"({"instance":"spin1","p":0.3,"subset":[1,2],"weights":[1,2]})"));
    EXPECT_EQ(p.x.size(), 2);
    EXPECT_EQ(p.x[0], instances::spin1_observables()[1]);
    EXPECT_EQ(p.w(1, 1), 2.0);
    EXPECT_LT((p.rho.rho() - instances::spin1_state(0.3).rho()).norm(), 1e-15);

    const io::Problem q = io::problem_from_json(json::parse(R"({"instance":"qubit_pure","theta":1.0})"));
    EXPECT_TRUE(q.rho.is_pure());
    EXPECT_EQ(q.x.size(), 3);

    EXPECT_THROW(io::problem_from_json(json::parse(R"({"instance":"spin1"})")), ValidationError);
    EXPECT_THROW(io::problem_from_json(json::parse(R"({"instance":"spin1","p":1.5})")), ValidationError);
    EXPECT_THROW(io::problem_from_json(json::parse(R"({"instance":"nope"})")), ValidationError);
    EXPECT_THROW(io::problem_from_json(json::parse(R"({"instance":"spin1","p":0.3,"subset":[5]})")),
                 ValidationError);
    EXPECT_THROW(io::problem_from_json(json::parse(R"({"instance":"spin1","p":0.3,"weights":[1,-1,1]})")),
                 ValidationError);
}

TEST(ProblemJson, ExplicitStateAndObservables) {
    json j;
    j["state"] = io::state_to_json(instances::diagonal_qubit(0.25));
    j["observables"] = io::observables_to_json(instances::half_paulis());
    const io::Problem p = io::problem_from_json(j);
    EXPECT_EQ(p.rho.dim(), 2);
    EXPECT_TRUE(p.w.isIdentity(0.0));
    j["observables"] = io::observables_to_json(instances::spin1_observables());
    EXPECT_THROW(io::problem_from_json(j), ValidationError);
}

TEST(Sweep, ParsePointsAndApply) {
    const io::SweepSpec s = io::parse_sweep("p:0.05:0.95:19");
    const auto pts = s.points();
    ASSERT_EQ(pts.size(), 19u);
    EXPECT_EQ(pts.front(), 0.05);
    EXPECT_NEAR(pts.back(), 0.95, 1e-15);
    EXPECT_NEAR(pts[1], 0.1, 1e-15);
    EXPECT_EQ(io::parse_sweep("theta:1:2:1").points(), std::vector<double>{1.0});
    EXPECT_THROW(io::parse_sweep("p:0:1:0"), ValidationError);
    EXPECT_THROW(io::parse_sweep("p:0:x:3"), ValidationError);
    EXPECT_THROW(io::parse_sweep("p:0:1"), ValidationError);

    json j = json::parse(R"({"p":0.1,"params":[0.5,1.0]})");
    io::apply_sweep_value(j, "p", 0.7);
    io::apply_sweep_value(j, "params[1]", 2.5);
    EXPECT_EQ(j["p"], 0.7);
    EXPECT_EQ(j["params"][1], 2.5);
    EXPECT_THROW(io::apply_sweep_value(j, "theta", 1.0), ValidationError);
    EXPECT_THROW(io::apply_sweep_value(j, "params[2]", 1.0), ValidationError);
}

TEST(Csv, SchemaLineAndTwelveDigits) {
    EXPECT_EQ(io::fmt_num(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(io::fmt_num(-0.0), "0");
    EXPECT_EQ(io::fmt_num(123456789.123456789), "123456789.123");
    io::CsvTable t("demo/1", {"a", "b"});
    t.add_row({"1", "x"});
    std::ostringstream os;
    t.write(os);
    EXPECT_EQ(os.str(), "# schema: demo/1\na,b\n1,x\n");
    EXPECT_THROW(t.add_row({"1"}), std::logic_error);
}

TEST(SdpSelfTest, AllChecksPass) {
    const auto checks = sdp::self_test(1, 50);
    EXPECT_EQ(checks.size(), 57u);
    for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value << " vs " << c.reference;
}
