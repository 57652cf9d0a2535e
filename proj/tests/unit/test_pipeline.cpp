#include <catch_amalgamated.hpp>

#include <cmath>

#include "dcstop/errors.hpp"
#include "dcstop/pipeline.hpp"

using namespace dcstop;
using Catch::Approx;

namespace {

std::string problem_path(const std::string& name) { return std::string(DCSTOP_PROBLEMS_DIR) + "/" + name + ".yaml"; }

ErrorCode parse_error_of(const std::string& text) {
    try {
        parse_problem(text);
    } catch (const StoppingError& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

const char* kMinimal = R"(
schema_version: 1
parameters: {c: 2}
diffusion: {preset: gbm, volatility: 0.2, rate: 0.01}
payoff:
  breakpoints: [2]
  pieces: [c, {poly: [c - 2, 1]}]
)";

}  // namespace

TEST_CASE("expressions over parameters", "[cli]") {
    const ParameterMap p{{"c", 2.0}, {"K", 3.0}};
    CHECK(evaluate_expression("1.5e-3", p) == 1.5e-3);
    CHECK(evaluate_expression("c - 2", p) == 0.0);
    CHECK(evaluate_expression("-c*K + 1", p) == -5.0);
    CHECK(evaluate_expression("2^3^2", p) == 512.0);
    CHECK(evaluate_expression("(c + K) / 2", p) == 2.5);
    CHECK(evaluate_expression("sqrt(0.75) + 0.5", p) == Approx(0.5 + std::sqrt(0.75)));
    CHECK(std::isinf(evaluate_expression("inf", p)));
    for (const char* bad : {"", "c +", "(c", "x", "2 3", "foo(1)"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(evaluate_expression(bad, p), StoppingError);
    }
}

TEST_CASE("problem files parse into the pipeline types", "[cli]") {
    const auto pb = load_problem(problem_path("example1_c2"));
    CHECK(pb.name == "example1_c2");
    CHECK(pb.parameters.at("c") == 2.0);
    CHECK(pb.diffusion.preset == Preset::GeometricBrownianMotion);
    CHECK(pb.payoff(1.0) == 2.0);
    CHECK(pb.payoff(3.0) == 3.0);
    CHECK(pb.verify.x0 == std::vector<double>{2.0});
    REQUIRE(pb.verify.psor);
    CHECK(pb.verify.psor->nodes == 4000);
    CHECK(pb.verify.sim.scheme == Scheme::ExactGBM);

    const auto other = load_problem(problem_path("example1_c2"), {{"c", 5.0}});
    CHECK(other.payoff(1.0) == 5.0);
    CHECK(other.payoff(3.0) == 6.0);
}

TEST_CASE("malformed problems raise ParseError", "[cli]") {
    CHECK_THROWS_AS(load_problem(problem_path("malformed")), StoppingError);
    CHECK(parse_error_of("schema_version: 1\ndiffusion: [") == ErrorCode::ParseError);
    CHECK(parse_error_of("name: x") == ErrorCode::ParseError);  // no schema_version
    const std::string ok = kMinimal;
    CHECK_NOTHROW(parse_problem(ok));
    auto edit = [&](const std::string& from, const std::string& to) {
        auto s = ok;
        s.replace(s.find(from), from.size(), to);
        return parse_error_of(s);
    };
    CHECK(edit("schema_version: 1", "schema_version: 2") == ErrorCode::ParseError);
    CHECK(edit("preset: gbm", "preset: heston") == ErrorCode::ParseError);
    CHECK(edit("breakpoints: [2]", "breakpoints: [-2]") == ErrorCode::ParseError);  // outside ]0, inf[
    CHECK(edit("breakpoints: [2]", "breakpoints: [2, 3]") == ErrorCode::ParseError);
    CHECK(edit("rate: 0.01", "rate: 0.01, speed: 3") == ErrorCode::ParseError);
    CHECK(edit("c - 2", "d - 2") == ErrorCode::ParseError);
    CHECK(edit("pieces: [c,", "staircase: false\n  pieces: [0,") == ErrorCode::ParseError);  // jump without staircase
    CHECK_THROWS_AS(parse_problem(ok, {{"d", 1.0}}), StoppingError);
}

TEST_CASE("pipeline solves the kinked payoff", "[cli]") {
    const auto pb = load_problem(problem_path("example1_c2"));
    const auto rep = run_problem(pb, VerifyLevel::None, 1);
    REQUIRE(rep.status == RunStatus::Solved);
    REQUIRE(rep.solution);
    CHECK(rep.solution->label == CaseLabel::VI);
    REQUIRE(rep.solution->pair);
    CHECK(rep.solution->pair->a == Approx(0.93500929).margin(1e-6));
    CHECK(rep.solution->pair->b == Approx(4.27803237).margin(1e-6));
    CHECK(exit_code(rep.status) == 0);
    const auto j = report_json(rep, pb);
    CHECK(j["solution"]["label"] == "VI");
    CHECK(j["classification"]["shape"] == "-+-");
}

TEST_CASE("x^2 is rejected by the integrability gate", "[cli]") {
    const auto rep = run_problem(load_problem(problem_path("x_squared")));
    CHECK(rep.status == RunStatus::Rejected);
    CHECK(exit_code(rep.status) == 3);
    CHECK(rep.error == ErrorCode::IntegrabilityFailure);
    CHECK_THAT(rep.message, Catch::Matchers::ContainsSubstring("r > j b + j(j-1) sigma^2 / 2"));
    CHECK_THAT(rep.message, Catch::Matchers::ContainsSubstring("j = 2"));
}

TEST_CASE("report round-trips through JSON with identical verdicts", "[cli][property]") {
    for (const char* name : {"example1_c2", "put", "staircase_g2"}) {
        CAPTURE(name);
        auto pb = load_problem(problem_path(name));
        const auto rep = run_problem(pb, VerifyLevel::None, 7);
        REQUIRE(rep.value);
        const auto text = report_json(rep, pb).dump();
        const auto back = partition_from_json(nlohmann::json::parse(text));
        const auto prep = prepare(pb);
        const ValueFunction v2(back, prep.g, prep.pair);
        const auto grid = verification_grid(*rep.value);
        REQUIRE(grid == verification_grid(v2));
        const auto r1 = verify_solution(*rep.value, grid);
        const auto r2 = verify_solution(v2, grid);
        REQUIRE(r1.checks.size() == r2.checks.size());
        for (std::size_t i = 0; i < r1.checks.size(); ++i) {
            CHECK(r1.checks[i].pass == r2.checks[i].pass);
            CHECK(r1.checks[i].worst == r2.checks[i].worst);
        }
    }
}

TEST_CASE("same file and seed give byte-identical artifacts", "[cli][property]") {
    auto pb = load_problem(problem_path("example1_c2"));
    pb.verify.fast_paths = 4000;
    const auto r1 = run_problem(pb, VerifyLevel::Fast, 99);
    const auto r2 = run_problem(pb, VerifyLevel::Fast, 99);
    CHECK(value_csv(r1, pb) == value_csv(r2, pb));
    CHECK(value_svg(r1, pb) == value_svg(r2, pb));
    REQUIRE(r1.monte_carlo.size() == 1);
    CHECK(r1.monte_carlo[0].estimate.mean == r2.monte_carlo[0].estimate.mean);
    CHECK(r1.monte_carlo[0].agrees);
    CHECK(r1.status == RunStatus::Solved);

    const auto csv = value_csv(r1, pb);
    CHECK(csv.rfind("x,g,v,region\n", 0) == 0);
    CHECK(csv.find(",C\n") != std::string::npos);
    CHECK(csv.find(",D\n") != std::string::npos);
}

TEST_CASE("sweep rows follow the regimes and match single runs", "[cli]") {
    const auto text = read_text_file(problem_path("example1_c2"));
    CHECK(sweep(text, "c", 1.0, 0.0, 0.5).empty());
    CHECK(sweep(text, "c", 0.0, 1.0, 0.0).empty());
    CHECK(sweep_csv({}, "c") == "c,case,inferred,a,b,A,B,boundaries,status,message\n");
    CHECK_THROWS_AS(sweep(text, "k", 0, 1, 1), StoppingError);

    const auto rows = sweep(text, "c", -1.0, 2.0, 1.5, 2);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].label == "III");
    CHECK_FALSE(rows[0].a);
    REQUIRE(rows[0].b);
    CHECK(*rows[0].b == Approx((2 - (-1.0)) * (0.5 + std::sqrt(0.75)) / (std::sqrt(0.75) - 0.5)));
    CHECK(rows[1].label == "VI");
    CHECK(rows[1].value == 0.5);
    CHECK(rows[2].label == "VI");

    const auto single = run_problem(load_problem(problem_path("example1_c2")), VerifyLevel::None, 1);
    CHECK(*rows[2].a == single.solution->pair->a);
    CHECK(*rows[2].b == single.solution->pair->b);
    CHECK(*rows[2].A == single.solution->pair->A);
    CHECK(*rows[2].B == single.solution->pair->B);
}

TEST_CASE("other shipped problems", "[cli]") {
    const auto put = run_problem(load_problem(problem_path("put")), VerifyLevel::None, 1);
    REQUIRE(put.solution);
    CHECK(put.solution->label == CaseLabel::IV);
    CHECK(put.solution->partition.boundaries().front() == Approx(1.0 * (0.5 - std::sqrt(0.75)) / (-0.5 - std::sqrt(0.75))));

    const auto g1 = run_problem(load_problem(problem_path("staircase_g1")), VerifyLevel::None, 1);
    REQUIRE(g1.solution);
    CHECK(g1.solution->label == CaseLabel::III);
    CHECK(g1.solution->partition.boundaries() == std::vector<double>{10.0});

    // Numerical phi, psi from coefficient tables reproduce the closed-form run.
    const auto custom = run_problem(load_problem(problem_path("custom_gbm")), VerifyLevel::None, 1);
    REQUIRE(custom.solution);
    REQUIRE(custom.solution->pair);
    CHECK(custom.solution->pair->a == Approx(0.93500929).margin(1e-4));
    CHECK(custom.solution->pair->b == Approx(4.27803237).margin(1e-4));

    const auto ou = run_problem(load_problem(problem_path("ou_call")), VerifyLevel::Fast, 3);
    REQUIRE(ou.solution);
    CHECK(ou.solution->label == CaseLabel::III);
    CHECK(ou.status == RunStatus::Solved);
}
