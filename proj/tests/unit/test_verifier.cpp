#include <catch_amalgamated.hpp>

#include "dcstop/value_function.hpp"
#include "dcstop/verifier.hpp"
#include "fixtures.hpp"

using namespace dcstop;
using Catch::Approx;

namespace {

const FundamentalPair& gbm() {
    static const FundamentalPair pair = fundamental_solutions(fixtures::reference_gbm());
    return pair;
}

Solution example1() {
    const auto g = fixtures::kinked_linear(2.0);
    const auto mu = lop_measure(g, gbm().diffusion());
    const auto opts = default_scan(gbm());
    const auto pattern = sign_partition(mu, opts);
    const auto tp = turning_points(g, mu, gbm(), opts);
    const QFunctionals q(mu, gbm());
    return solve_case_VI(q, pattern, tp, g, true);
}

SimConfig quick(std::size_t paths = 20000) {
    auto cfg = default_sim_config(gbm().diffusion());
    cfg.paths = paths;
    return cfg;
}

}  // namespace

TEST_CASE("Monte Carlo value of the optimal strategy") {
    const auto g = fixtures::kinked_linear(2.0);
    const auto sol = example1();
    const auto v = assemble(sol, g, gbm());
    const auto est = estimate_value(gbm().diffusion(), g, sol.partition, 2.0, quick());
    CAPTURE(est.mean, est.std_error, v(2.0));
    CHECK(std::abs(est.mean - v(2.0)) < 3 * est.std_error + est.truncation_bias_bound);
    CHECK(est.std_error > 0);

    SECTION("start inside the stopping set") {
        const auto in_d = estimate_value(gbm().diffusion(), g, sol.partition, 6.0, quick());
        CHECK(in_d.mean == g(6.0));
        CHECK(in_d.std_error == 0.0);
    }
    SECTION("never stopping is worth nothing") {
        const auto never = estimate_value(gbm().diffusion(), g, solve_case_I(gbm()).partition, 2.0, quick());
        CHECK(never.mean == 0.0);
    }
    SECTION("same seed, same bits") {
        const auto again = estimate_value(gbm().diffusion(), g, sol.partition, 2.0, quick());
        CHECK(again.mean == est.mean);
        CHECK(again.std_error == est.std_error);
        auto one_thread = quick();
        one_thread.threads = 1;
        CHECK(estimate_value(gbm().diffusion(), g, sol.partition, 2.0, one_thread).mean == est.mean);
    }
}

TEST_CASE("Euler with bridge correction agrees with exact stepping") {
    const auto g = fixtures::kinked_linear(2.0);
    const auto sol = example1();
    auto exact = quick();
    auto euler = quick();
    euler.scheme = Scheme::EulerMaruyama;
    euler.dt = 0.005;
    const auto e1 = estimate_value(gbm().diffusion(), g, sol.partition, 2.0, exact);
    const auto e2 = estimate_value(gbm().diffusion(), g, sol.partition, 2.0, euler);
    CHECK(std::abs(e1.mean - e2.mean) < 3 * std::hypot(e1.std_error, e2.std_error));
}

TEST_CASE("hitting factor by simulation") {
    auto cfg = quick(8000);
    cfg.dt = 0.1;
    cfg.discount_cap = 1e-5;
    const auto est = estimate_hitting_factor(gbm().diffusion(), 1.0, 2.0, cfg);
    CAPTURE(est.mean, est.std_error);
    CHECK(std::abs(est.mean - hitting_factor(gbm(), 1.0, 2.0)) < 3 * est.std_error + est.truncation_bias_bound);
    const auto down = estimate_hitting_factor(gbm().diffusion(), 4.0, 2.0, cfg);
    CHECK(std::abs(down.mean - std::pow(2.0, fixtures::kM)) < 3 * down.std_error + down.truncation_bias_bound);
}

TEST_CASE("perturbed strategies do no better") {
    const auto g = fixtures::kinked_linear(2.0);
    const auto sol = example1();
    const auto v = assemble(sol, g, gbm());
    const auto rows = perturbation_test(gbm().diffusion(), g, sol.partition, 2.0, {0.1}, quick());
    REQUIRE(rows.size() == 7);
    for (const auto& r : rows) {
        CAPTURE(r.label, r.estimate.mean, r.estimate.std_error);
        CHECK(r.estimate.mean <= v(2.0) + 3 * r.estimate.std_error);
    }
    // stopping at the atom gives up the reward for waiting there
    const auto early = move_boundary(sol.partition, sol.pair->b, 2.05);
    const auto worse = estimate_value(gbm().diffusion(), g, early, 2.0, quick());
    CHECK(worse.mean < v(2.0) - 3 * worse.std_error);
}

TEST_CASE("Dynkin residuals") {
    auto cfg = quick(3000);
    cfg.scheme = Scheme::EulerMaruyama;
    cfg.dt = 0.005;
    SECTION("psi is a discounted martingale") {
        const PayoffDC psi({}, {power_term(1.0, fixtures::kN)});
        const auto mu = lop_measure(psi, gbm().diffusion());
        const auto r = dynkin_check(gbm().diffusion(), psi, mu, 2.0, {1.5, 3.0}, {1.0, 5.0}, cfg);
        CAPTURE(r.residual, r.std_error);
        CHECK(std::abs(r.residual) < 3 * r.std_error + 1e-3);
    }
    SECTION("smooth payoff on a kink-free band") {
        const PayoffDC sq({}, {polynomial({0.0, 0.0, 1.0})});
        const auto mu = lop_measure(sq, gbm().diffusion());
        const auto r = dynkin_check(gbm().diffusion(), sq, mu, 2.0, {1.5, 3.0}, {1.0, 5.0}, cfg);
        CAPTURE(r.residual, r.std_error, r.accumulated);
        CHECK(std::abs(r.residual) < 3 * r.std_error + 1e-3 * std::abs(r.outer));
    }
    SECTION("equal bands give zero") {
        const auto g = fixtures::kinked_linear(2.0);
        const auto mu = lop_measure(g, gbm().diffusion());
        const auto r = dynkin_check(gbm().diffusion(), g, mu, 2.0, {1.0, 4.0}, {1.0, 4.0}, cfg);
        CHECK(r.residual == 0.0);
    }
}

TEST_CASE("PSOR oracle") {
    const auto g = fixtures::kinked_linear(2.0);
    const auto sol = example1();
    const auto v = assemble(sol, g, gbm());
    const auto res = psor_oracle(gbm().diffusion(), g, {0.05, 60.0, 1000});
    double worst = 0;
    for (std::size_t i = 0; i < res.x.size(); ++i) {
        if (res.x[i] < 0.1 || res.x[i] > 30) continue;
        worst = std::max(worst, std::abs(res.v[i] - v(res.x[i])) / std::abs(v(res.x[i])));
    }
    CHECK(worst < 0.01);
    const auto b = res.boundaries();
    REQUIRE(b.size() == 2);
    CHECK(b[0] == Approx(sol.pair->a).epsilon(0.02));
    CHECK(b[1] == Approx(sol.pair->b).epsilon(0.02));

    SECTION("negative payoff: oracle stays at zero-ish value") {
        const PayoffDC neg({}, {constant_piece(-1.0)});
        const auto r = psor_oracle(gbm().diffusion(), neg, {0.05, 60.0, 400});
        for (std::size_t i = 1; i + 1 < r.x.size(); ++i) CHECK(r.v[i] >= -1.0);
    }
    SECTION("Case II: oracle returns g") {
        const PayoffDC lin({}, {polynomial({0.0, 1.0})});
        const auto r = psor_oracle(gbm().diffusion(), lin, {0.05, 60.0, 400});
        for (std::size_t i = 0; i < r.x.size(); ++i) CHECK(r.v[i] == Approx(r.g[i]).epsilon(1e-9));
    }
}
