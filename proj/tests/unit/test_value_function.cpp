#include <catch_amalgamated.hpp>

#include "dcstop/value_function.hpp"
#include "fixtures.hpp"

using namespace dcstop;
using Catch::Approx;

namespace {

const FundamentalPair& gbm() {
    static const FundamentalPair pair = fundamental_solutions(fixtures::reference_gbm());
    return pair;
}

Solution solve_kinked(double c) {
    const auto g = fixtures::kinked_linear(c);
    const auto mu = lop_measure(g, gbm().diffusion());
    const auto opts = default_scan(gbm());
    const auto pattern = sign_partition(mu, opts);
    const auto tp = turning_points(g, mu, gbm(), opts);
    const auto cls = classify(pattern, tp, g, gbm());
    const QFunctionals q(mu, gbm());
    return solve_case_VI(q, pattern, tp, g, cls.inferred);
}

std::vector<double> probe_grid() { return scan_grid({0.1, 50.0}, 1000); }

}  // namespace

TEST_CASE("assembled Example 1 value function passes every check") {
    const auto g = fixtures::kinked_linear(2.0);
    const auto sol = solve_kinked(2.0);
    const auto v = assemble(sol, g, gbm());
    const auto& p = *sol.pair;
    for (double x : probe_grid()) {
        const double want = (x > p.a && x < p.b) ? p.A * std::pow(x, fixtures::kM) + p.B * std::pow(x, fixtures::kN)
                                                 : g(x);
        CHECK(v(x) == Approx(want).epsilon(1e-12));
    }
    const auto grid = probe_grid();
    const auto rep = verify_solution(v, grid);
    for (const auto& c : rep.checks) {
        CAPTURE(c.name, c.worst, c.worst_x);
        CHECK(c.pass);
    }
    CHECK(verify_solution(v, verification_grid(v)).ok());
    for (const auto& s : smooth_fit_report(v)) {
        CHECK(s.smooth);
        CHECK(std::abs(s.left_gap) < 1e-6);
        CHECK(std::abs(s.right_gap) < 1e-6);
    }
}

TEST_CASE("moving a boundary breaks the solution") {
    const auto g = fixtures::kinked_linear(2.0);
    auto sol = solve_kinked(2.0);
    const double a = sol.partition.continuation[0].lo;
    const double b = sol.partition.continuation[0].hi + 0.05;
    sol.partition.continuation[0].hi = b;
    sol.partition.stopping[1].lo = b;
    // original coefficients no longer meet g at the moved boundary
    CHECK_THROWS_AS(assemble(sol, g, gbm()), StoppingError);
    // refitting restores continuity but not optimality
    const auto [A, B] = fit_two_points(gbm(), a, g(a), b, g(b));
    sol.partition.continuation[0].A = A;
    sol.partition.continuation[0].B = B;
    const auto v = assemble(sol, g, gbm());
    const auto rep = verify_solution(v, verification_grid(v));
    CHECK_FALSE(rep.ok());
    bool broken = false;
    for (const auto& s : smooth_fit_report(v)) broken = broken || !s.holds;
    CHECK(broken);
}

TEST_CASE("trivial cases") {
    const auto g = PayoffDC({}, {polynomial({0.0, 1.0})});
    const auto v2 = assemble(solve_case_II(gbm()), g, gbm());
    for (double x : probe_grid()) CHECK(v2(x) == g(x));
    CHECK(verify_solution(v2, probe_grid()).ok());

    const auto neg = PayoffDC({}, {constant_piece(-1.0)});
    const auto v1 = assemble(solve_case_I(gbm()), neg, gbm());
    for (double x : probe_grid()) CHECK(v1(x) == 0.0);
    CHECK(verify_solution(v1, probe_grid()).ok());
}

TEST_CASE("staircase g2 has continuous-only fit at the jumps") {
    const auto g = fixtures::staircase_g2();
    const auto sol = paste_intervals(g, gbm());
    const auto v = assemble(sol, g, gbm());
    const auto grid = verification_grid(v);
    const auto rep = verify_solution(v, grid);
    for (const auto& c : rep.checks) {
        CAPTURE(c.name, c.worst, c.worst_x);
        CHECK(c.pass);
    }
    for (const auto& s : smooth_fit_report(v)) {
        CHECK(s.value_jump);
        CHECK_FALSE(s.smooth);
        CHECK(s.holds);
    }
}

TEST_CASE("put value dominates the payoff and is nonnegative") {
    const auto g = fixtures::put(1.0);
    const auto mu = lop_measure(g, gbm().diffusion());
    const auto tp = turning_points(g, mu, gbm(), default_scan(gbm()));
    const auto v = assemble(solve_case_IV(tp, g, gbm()), g, gbm());
    const auto grid = verification_grid(v);
    CHECK(verify_solution(v, grid).ok());
    for (double x : grid) CHECK(v(x) >= 0.0);
    const auto sf = smooth_fit_report(v);
    REQUIRE(sf.size() == 1);
    CHECK(sf[0].smooth);
}

TEST_CASE("raising the payoff on the stopping set does not lower v") {
    const auto base = solve_kinked(2.0);
    const auto vb = assemble(base, fixtures::kinked_linear(2.0), gbm());
    const auto raised = fixtures::kinked_linear(2.5);
    const auto vr = assemble(solve_kinked(2.5), raised, gbm());
    for (double x : probe_grid()) CHECK(vr(x) >= vb(x) - 1e-10);
}

TEST_CASE("BM put passes every check on the linear window") {
    const auto spec = brownian_motion(0.05, 0.3, 0.02);
    const auto pair = fundamental_solutions(spec);
    const PayoffDC g({1.0}, {polynomial({1.0, -1.0}), constant_piece(0)});
    const auto mu = lop_measure(g, spec);
    const auto opts = default_scan(pair);
    const auto tp = turning_points(g, mu, pair, opts);
    const auto sol = solve_case_IV(tp, g, pair);
    const auto v = assemble(sol, g, pair);
    const auto rep = verify_solution(v, verification_grid(v));
    for (const auto& c : rep.checks) {
        CAPTURE(c.name, c.worst, c.worst_x);
        CHECK(c.pass);
    }
}
