#include <catch_amalgamated.hpp>

#include <cmath>

#include "dcstop/measure.hpp"

using namespace dcstop;
using Catch::Approx;

namespace {

SignedMeasure sample_measure() {
    // density 1 on ]0,1[, x on [1,3[, atoms +2 at 1 and -0.5 at 2
    return SignedMeasure({0, kInf},
                         {{0.0, 1.0, [](double) { return 1.0; }}, {1.0, 3.0, [](double x) { return x; }}},
                         {{1.0, 2.0}, {2.0, -0.5}});
}

}  // namespace

TEST_CASE("open and closed ends differ exactly by atom mass", "[measure]") {
    const auto mu = sample_measure();
    const RealFn one = [](double) { return 1.0; };
    CHECK(integrate_measure(mu, one, 0.0, End::Open, 1.0, End::Open) == Approx(1.0));
    CHECK(integrate_measure(mu, one, 0.0, End::Open, 1.0, End::Closed) == Approx(3.0));
    CHECK(integrate_measure(mu, one, 1.0, End::Closed, 2.0, End::Open) == Approx(2.0 + 1.5));
    CHECK(integrate_measure(mu, one, 1.0, End::Open, 2.0, End::Closed) == Approx(1.5 - 0.5));
    CHECK(integrate_measure(mu, one, 1.0, End::Closed, 1.0, End::Closed) == Approx(2.0));
    CHECK(integrate_measure(mu, one, 0.0, End::Open, kInf, End::Open) == Approx(1.0 + 4.0 + 1.5));
    CHECK(integrate_variation(mu, one, 0.0, kInf) == Approx(1.0 + 4.0 + 2.5));
    CHECK(mu.density(1.0) == 1.0);
    CHECK(mu.density(0.5) == 1.0);
    CHECK(mu.density(5.0) == 0.0);
    CHECK(mu.atom_at(2.0) == -0.5);
}

TEST_CASE("weighted integrals against an independent closed form", "[measure]") {
    const auto mu = sample_measure();
    const RealFn w = [](double x) { return std::exp(-x); };
    // int_0^1 e^{-x} + int_1^3 x e^{-x} + 2 e^{-1} - 0.5 e^{-2}
    const double oracle = (1 - std::exp(-1.0)) + (2 * std::exp(-1.0) - 4 * std::exp(-3.0)) + 2 * std::exp(-1.0) -
                          0.5 * std::exp(-2.0);
    CHECK(integrate_measure(mu, w, 0.0, End::Open, 10.0, End::Open) == Approx(oracle).epsilon(1e-12));
}

TEST_CASE("cumulative tables agree with direct integration", "[measure]") {
    const auto mu = sample_measure();
    const RealFn w = [](double x) { return 1.0 / (1.0 + x); };
    const auto nodes = scan_grid({0.01, 10.0}, 64);
    const CumulativeIntegral left(mu, w, CumulativeIntegral::Anchor::Left, nodes, {0, kInf});
    const CumulativeIntegral right(mu, w, CumulativeIntegral::Anchor::Right, nodes, {0, kInf});
    for (double x : {0.001, 0.3, 1.0, 1.7, 2.0, 2.9, 3.0, 12.0}) {
        CHECK(left.closed(x) == Approx(integrate_measure(mu, w, 0, End::Open, x, End::Closed)).epsilon(1e-11));
        CHECK(left.open(x) == Approx(integrate_measure(mu, w, 0, End::Open, x, End::Open)).epsilon(1e-11));
        CHECK(right.closed(x) ==
              Approx(integrate_measure(mu, w, x, End::Closed, kInf, End::Open)).epsilon(1e-11).margin(1e-14));
        CHECK(right.open(x) ==
              Approx(integrate_measure(mu, w, x, End::Open, kInf, End::Open)).epsilon(1e-11).margin(1e-14));
    }
    CHECK(left.closed(1.0) - left.open(1.0) == Approx(2.0 * 0.5));
}

TEST_CASE("scan grid is log-uniform and merges extras", "[measure]") {
    const double extra[] = {2.0, 50.0, 1e9};
    const auto g = scan_grid({0.1, 10.0}, 5, extra);
    REQUIRE(g.size() == 6);
    CHECK(g.front() == 0.1);
    CHECK(g.back() == 10.0);
    CHECK(g[1] == Approx(std::sqrt(0.1)));
    CHECK(std::find(g.begin(), g.end(), 2.0) != g.end());
}
