#include <catch_amalgamated.hpp>

#include "dcstop/classifier.hpp"
#include "fixtures.hpp"

using namespace dcstop;
using Catch::Approx;

namespace {

struct Pipeline {
    SignPattern pattern;
    TurningPoints tp;
    Classification cls;
};

Pipeline run(const PayoffDC& g, const FundamentalPair& pair) {
    const auto mu = lop_measure(g, pair.diffusion());
    const auto opts = default_scan(pair);
    Pipeline p;
    p.pattern = sign_partition(mu, opts);
    p.tp = turning_points(g, mu, pair, opts);
    p.cls = classify(p.pattern, p.tp, g, pair);
    return p;
}

const FundamentalPair& gbm() {
    static const FundamentalPair pair = fundamental_solutions(fixtures::reference_gbm());
    return pair;
}

}  // namespace

TEST_CASE("kinked linear with c in [-2,0] is positive then negative") {
    for (double c : {0.0, -1.0, -2.0}) {
        const auto p = run(fixtures::kinked_linear(c), gbm());
        CHECK(p.pattern.shape == "+-");
        REQUIRE(p.pattern.x_r);
        CHECK(*p.pattern.x_r == Approx(2.0 - c).epsilon(1e-9));
        CHECK(p.cls.label == CaseLabel::III);
        // (x - 2 + c) x^{-n} peaks at (2 - c) n / (n - 1)
        REQUIRE(p.tp.psi);
        const double n = fixtures::kN;
        CHECK(p.tp.psi->location == Approx((2.0 - c) * n / (n - 1.0)).epsilon(1e-8));
        CHECK(p.tp.psi->global);
    }
}

TEST_CASE("kinked linear with positive c has the valley shape") {
    for (double c : {2.0, 8.0, 10.0}) {
        const auto p = run(fixtures::kinked_linear(c), gbm());
        CHECK(p.pattern.shape == "-+-");
        CHECK(*p.pattern.x_l == Approx(2.0));
        CHECK(*p.pattern.x_r == Approx(2.0));
        CHECK(p.cls.label == CaseLabel::VI);
        CHECK(p.cls.inferred);
        CHECK_FALSE(p.tp.psi);
        CHECK_FALSE(p.tp.phi);
    }
}

TEST_CASE("linear payoff is Case II") {
    const PayoffDC g({}, {polynomial({0.0, 1.0})});
    const auto p = run(g, gbm());
    CHECK(p.pattern.shape == "-");
    CHECK(p.cls.label == CaseLabel::II);
}

TEST_CASE("zero payoff is Case II") {
    const PayoffDC g({}, {constant_piece(0.0)});
    const auto p = run(g, gbm());
    CHECK(p.pattern.shape.empty());
    CHECK(p.cls.label == CaseLabel::II);
}

TEST_CASE("put is Case IV with the perpetual put threshold") {
    for (double k : {0.5, 1.0, 3.0}) {
        const auto p = run(fixtures::put(k), gbm());
        CHECK(p.pattern.shape == "-+");
        CHECK(*p.pattern.x_l == Approx(k));
        CHECK(p.cls.label == CaseLabel::IV);
        REQUIRE(p.tp.phi);
        const double m = fixtures::kM;
        CHECK(p.tp.phi->location == Approx(k * m / (m - 1.0)).epsilon(1e-8));
        CHECK(p.tp.phi->location == Approx(0.26794919 * k).epsilon(1e-7));
    }
}

TEST_CASE("trapezoid is the hill shape") {
    const auto p = run(fixtures::trapezoid(), gbm());
    CHECK(p.pattern.shape == "+-+");
    CHECK(*p.pattern.x_l == Approx(1.0));
    CHECK(*p.pattern.x_r == Approx(5.0));
    CHECK(p.cls.label == CaseLabel::V);
    REQUIRE(p.tp.psi);
    REQUIRE(p.tp.phi);
    CHECK(p.tp.psi->location <= p.tp.phi->location);
}

TEST_CASE("three sign changes are rejected") {
    const PayoffDC g({1, 2, 3, 4},
                     {constant_piece(0), polynomial({-1, 1}), constant_piece(1), polynomial({-2, 1}), constant_piece(2)});
    const auto mu = lop_measure(g, gbm().diffusion());
    try {
        sign_partition(mu, default_scan(gbm()));
        FAIL("expected MoreThanTwoSignChanges");
    } catch (const StoppingError& e) {
        CHECK(e.code() == ErrorCode::MoreThanTwoSignChanges);
    }
}

TEST_CASE("classification is invariant under positive scaling") {
    for (double k : {1e-3, 1.0, 250.0}) {
        const auto base = run(fixtures::kinked_linear(-1.0), gbm());
        const PayoffDC g({2.0}, {constant_piece(-k), polynomial({-3.0 * k, k})});
        const auto p = run(g, gbm());
        CHECK(p.pattern.shape == base.pattern.shape);
        CHECK(p.cls.label == base.cls.label);
        CHECK(p.tp.psi->location == Approx(base.tp.psi->location).epsilon(1e-9));
    }
}

TEST_CASE("staircase turning points") {
    const SignedMeasure empty(gbm().support(), {}, {});
    const auto opts = default_scan(gbm());
    std::vector<double> c1, c2;
    const auto t1 = turning_point_psi(fixtures::staircase_g1(), empty, gbm(), opts, &c1);
    const auto t2 = turning_point_psi(fixtures::staircase_g2(), empty, gbm(), opts, &c2);
    REQUIRE(t1);
    REQUIRE(t2);
    CHECK(t1->location == Approx(10.0));
    CHECK(t1->ratio == Approx(25.0 * std::pow(10.0, -fixtures::kN)).epsilon(1e-10));
    CHECK(t1->ratio == Approx(1.07625357).epsilon(1e-7));
    CHECK(t2->location == Approx(2.0));
    CHECK(t2->ratio == Approx(0.77591719).epsilon(1e-7));
    CHECK(c1.size() == 5);
    CHECK(c2.size() == 5);
    CHECK(t1->global);
    CHECK(t2->global);
}

TEST_CASE("turning point beats every grid ratio") {
    const auto g = fixtures::kinked_linear(-2.0);
    const auto p = run(g, gbm());
    const double best = p.tp.psi->ratio;
    for (double x : scan_grid({1e-3, 1e3}, 4000)) CHECK(g(x) / gbm().psi(x) <= best * (1 + 1e-12));
}

TEST_CASE("turning point under exponentially growing Green weights") {
    // BM call x^+: g/psi = x e^{-n x} peaks at 1/n although Psi grows like e^{-m x}
    const auto spec = brownian_motion(0.05, 0.3, 0.02);
    const auto pair = fundamental_solutions(spec);
    const PayoffDC g({0.0}, {constant_piece(0), polynomial({0.0, 1.0})});
    const auto mu = lop_measure(g, spec);
    const auto opts = default_scan(pair);
    const auto tp = turning_point_psi(g, mu, pair, opts);
    REQUIRE(tp);
    const double n = (-0.05 + std::sqrt(0.05 * 0.05 + 2 * 0.02 * 0.09)) / 0.09;
    CHECK(tp->location == Approx(1 / n).epsilon(1e-9));
    const auto cls = classify(sign_partition(mu, opts), turning_points(g, mu, pair, opts), g, pair);
    CHECK(cls.label == CaseLabel::III);
}
