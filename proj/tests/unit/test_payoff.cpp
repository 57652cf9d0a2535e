#include <catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"

using namespace dcstop;
using namespace fixtures;
using Catch::Approx;

TEST_CASE("payoff evaluation is right-continuous with one-sided derivatives", "[payoff]") {
    const auto g = kinked_linear(2.0);
    CHECK(g(1.0) == 2.0);
    CHECK(g(2.0) == 2.0);
    CHECK(g(5.0) == 5.0);
    CHECK(g.d_left(2.0) == 0.0);
    CHECK(g.d_right(2.0) == 1.0);
    CHECK(g.kink_jump(0) == 1.0);
    CHECK_FALSE(g.has_value_jumps());

    const auto s = staircase_g2();
    CHECK(s(2.0) == 2.0);
    CHECK(s.left_limit(2.0) == 0.0);
    CHECK(s.value_jump(0) == 2.0);
}

TEST_CASE("jumps without staircase mode are rejected", "[payoff]") {
    try {
        PayoffDC({1.0}, {constant_piece(0), constant_piece(1)});
        FAIL("expected an error");
    } catch (const StoppingError& e) {
        CHECK(e.code() == ErrorCode::StaircaseModeRequired);
    }
    CHECK_THROWS_AS(lop_measure(staircase_g1(), reference_gbm()), StoppingError);
    CHECK_THROWS_AS(PayoffDC({1.0, 1.0}, {constant_piece(0), constant_piece(0), constant_piece(0)}), StoppingError);
}

TEST_CASE("L g of the kinked payoff: -0.01 g density and a 0.08 atom", "[payoff]") {
    const auto spec = reference_gbm();
    for (double c : {-2.0, 0.0, 2.0, 8.0}) {
        const auto g = kinked_linear(c);
        const auto mu = lop_measure(g, spec);
        REQUIRE(mu.atoms().size() == 1);
        CHECK(mu.atoms()[0].location == 2.0);
        CHECK(mu.atoms()[0].weight == Approx(0.08));
        for (double x : {0.3, 1.9, 2.0, 3.5, 40.0}) CHECK(mu.density(x) == Approx(-0.01 * g(x)).margin(1e-15));
    }
}

TEST_CASE("lop_measure is linear", "[payoff][property]") {
    const auto spec = geometric_bm(0.01, 0.25, 0.04);
    const auto g1 = put(3.0), g2 = trapezoid();
    const double a = -1.7;
    // a g1 + g2 on the union of breakpoints
    std::vector<double> br{1, 2, 3, 4, 5};
    std::vector<Piece> pieces;
    const double reps[] = {0.5, 1.5, 2.5, 3.5, 4.5, 6.0};
    for (double r : reps) {
        pieces.push_back(scaled(g1.pieces()[g1.piece_index(r)], a) + g2.pieces()[g2.piece_index(r)]);
    }
    const PayoffDC sum(br, pieces);
    const auto m1 = lop_measure(g1, spec), m2 = lop_measure(g2, spec), ms = lop_measure(sum, spec);
    for (double x : {0.2, 1.0, 1.3, 2.7, 3.0, 4.4, 7.0}) {
        CHECK(ms.density(x) == Approx(a * m1.density(x) + m2.density(x)).margin(1e-14));
    }
    for (double y : br) CHECK(ms.atom_at(y) == Approx(a * m1.atom_at(y) + m2.atom_at(y)).margin(1e-14));
}

TEST_CASE("atom sign follows the convexity kink", "[payoff][property]") {
    const auto spec = reference_gbm();
    const auto mu = lop_measure(trapezoid(), spec);
    CHECK(mu.atom_at(1.0) > 0);
    CHECK(mu.atom_at(2.0) < 0);
    CHECK(mu.atom_at(4.0) < 0);
    CHECK(mu.atom_at(5.0) > 0);
    CHECK(mu.atom_at(1.0) == Approx(0.5 * 0.04 * 1.0));
}

TEST_CASE("integrability of power payoffs matches the GBM gate", "[payoff][property]") {
    for (double j : {1.5, 2.0, 2.5, 3.0, 3.5}) {
        for (double r : {0.01, 0.03, 0.06, 0.1, 0.15}) {
            const auto spec = geometric_bm(0.0, 0.2, r);
            const auto pair = fundamental_solutions(spec);
            const PayoffDC g(power_term(1.0, j));
            const bool gate = r > 0.5 * j * (j - 1) * 0.04;
            const auto rep = check_integrability(lop_measure(g, spec), pair);
            INFO("j = " << j << ", r = " << r << ": " << rep.right.detail);
            CHECK(rep.integrable == gate);
            CHECK(check_growth_limits(g, pair).limits_hold == gate);
        }
    }
}

TEST_CASE("growth limits reject multiples of psi and phi", "[payoff]") {
    const auto pair = fundamental_solutions(reference_gbm());
    CHECK_FALSE(check_growth_limits(PayoffDC(power_term(3.0, kN)), pair).right);
    CHECK_FALSE(check_growth_limits(PayoffDC(power_term(3.0, kM)), pair).left);
    CHECK(check_growth_limits(kinked_linear(2.0), pair).limits_hold);
    CHECK(check_growth_limits(staircase_g2(), pair).limits_hold);
}

TEST_CASE("representation reconstructs the kinked payoff", "[payoff]") {
    const auto spec = reference_gbm();
    const auto pair = fundamental_solutions(spec);
    for (double c : {-1.0, 2.0, 7.5}) {
        const auto g = kinked_linear(c);
        const auto mu = lop_measure(g, spec);
        REQUIRE(check_integrability(mu, pair).integrable);
        const auto grid = scan_grid({0.5, 50.0}, 60, std::vector<double>{2.0});
        const auto rep = representation_check(g, mu, pair, grid);
        INFO("c = " << c << ", worst x = " << rep.worst_x);
        CHECK(rep.max_error <= 1e-6);
    }
}

TEST_CASE("representation with numerical fundamental solutions", "[payoff]") {
    const auto spec = geometric_bm(0.0, 0.2, 0.01, {1e-3, 1e3});
    const auto pair = numerical_fundamental_solutions(spec);
    const auto g = put(1.0);
    const auto mu = lop_measure(g, spec);
    const auto grid = scan_grid({0.2, 5.0}, 30, std::vector<double>{1.0});
    CHECK(representation_check(g, mu, pair, grid).max_error <= 1e-4);
}

TEST_CASE("Green weight integral has the closed form of the power pair", "[payoff]") {
    // int_{]0,x[} Psi(s) (-0.01 c) ds with Psi = s^{-m-1} / (s0^2 (n-m))
    const auto spec = reference_gbm();
    const auto pair = fundamental_solutions(spec);
    const auto mu = lop_measure(kinked_linear(2.0), spec);
    const double x = 1.5;
    const double oracle = -0.02 * std::pow(x, -kM) / (-kM) / (0.04 * (kN - kM));
    const double got = integrate_measure(mu, [&](double s) { return pair.cap_psi(s); }, 0, End::Open, x, End::Open);
    CHECK(got == Approx(oracle).epsilon(1e-12));
}

TEST_CASE("slope identities hold on both sides of kinks", "[payoff][property]") {
    const auto spec = reference_gbm();
    const auto pair = fundamental_solutions(spec);
    const auto g = kinked_linear(2.0);
    const auto mu = lop_measure(g, spec);
    for (double x : scan_grid({0.3, 40.0}, 100, std::vector<double>{2.0})) {
        const auto s = slope_functionals(g, mu, pair, x, 1e-6);
        CHECK(s.max_mismatch <= 1e-6);
    }
    // psi bracket jumps by kappa W(2) Psi(2) 0.08 across the atom
    const auto s = slope_functionals(g, mu, pair, 2.0);
    const double jump = s.identities[0].rhs - s.identities[1].rhs;
    CHECK(jump == Approx(2.0 * pair.wronskian(2.0) * pair.cap_psi(2.0) * 0.08).epsilon(1e-12));
    CHECK(s.identities[0].lhs - s.identities[1].lhs == Approx(jump).epsilon(1e-10));
}

TEST_CASE("slope identity for g = x at x = 1", "[payoff]") {
    const auto spec = reference_gbm();
    const auto pair = fundamental_solutions(spec);
    const PayoffDC g(polynomial({0.0, 1.0}));
    const auto s = slope_functionals(g, lop_measure(g, spec), pair, 1.0);
    CHECK(s.identities[0].lhs == Approx(1 - kN).epsilon(1e-14));
    CHECK(s.identities[0].rhs == Approx(1 - kN).epsilon(1e-9));
}

TEST_CASE("slope identity mismatch is reported", "[payoff]") {
    const auto spec = reference_gbm();
    const auto pair = fundamental_solutions(spec);
    const auto g = kinked_linear(2.0);
    // measure of a different payoff
    const auto wrong = lop_measure(kinked_linear(3.0), spec);
    try {
        slope_functionals(g, wrong, pair, 1.0);
        FAIL("expected IdentityMismatch");
    } catch (const StoppingError& e) {
        CHECK(e.code() == ErrorCode::IdentityMismatch);
    }
}

TEST_CASE("running payoff potential", "[payoff]") {
    const auto spec = reference_gbm();
    const auto pair = fundamental_solutions(spec);
    SECTION("H = 0 gives -G") {
        const auto g = running_payoff_to_terminal(PayoffDC(constant_piece(0)), put(2.0), pair, 257);
        for (double x : {0.5, 1.0, 3.0}) CHECK(g(x) == Approx(-put(2.0)(x)).margin(1e-14));
    }
    SECTION("perpetuity H = r x under driftless GBM gives h = x") {
        const auto g = running_payoff_to_terminal(PayoffDC(polynomial({0, 0.01})), PayoffDC(constant_piece(0)),
                                                  pair, 1025);
        for (double x : {1e-3, 0.1, 1.0, 7.0, 300.0, 1e7}) {
            CHECK(g(x) == Approx(x).epsilon(1e-8));
            CHECK(g.d_right(x) == Approx(1.0).epsilon(1e-7));
        }
    }
    SECTION("a step in H leaves h continuously differentiable") {
        const PayoffDC stack({3.0}, {constant_piece(0.01), constant_piece(0.03)}, true);
        const auto g = running_payoff_to_terminal(stack, PayoffDC(constant_piece(0.5)), pair, 1025);
        CHECK(g.left_limit(3.0) == Approx(g(3.0)).epsilon(1e-10));
        CHECK(g.d_left(3.0) == Approx(g.d_right(3.0)).epsilon(1e-8));
        // second derivative jumps by -2 (H+ - H-) / sigma^2
        const double jump = g.pieces()[1].d2(3.0) - g.pieces()[0].d2(3.0);
        CHECK(jump == Approx(-2.0 * 0.02 / spec.sigma2(3.0)).epsilon(1e-6));
        // far from the step h approaches H / r
        CHECK(g(1e-4) == Approx(1.0 - 0.5).epsilon(1e-3));
    }
}

TEST_CASE("slope identities where g vanishes locally", "[payoff]") {
    const auto spec = brownian_motion(0.05, 0.3, 0.02);
    const auto pair = fundamental_solutions(spec);
    const PayoffDC g({0.0}, {constant_piece(0), polynomial({0.0, 1.0})});
    const auto mu = lop_measure(g, spec);
    for (double x : {-5.0, -0.9, 0.0, 2.0, 8.0}) {
        CAPTURE(x);
        const auto s = slope_functionals(g, mu, pair, x);
        CHECK(s.max_mismatch < 1e-9);
    }
}
