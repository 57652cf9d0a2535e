#include "dcstop/value_function.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcstop {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}

// Value jump of g at x (0 away from breakpoints).
double jump_at(const PayoffDC& g, double x) { return g(x) - g.left_limit(x); }

}  // namespace

ValueFunction::ValueFunction(RegionPartition partition, PayoffDC g, FundamentalPair pair)
    : partition_(std::move(partition)), g_(std::move(g)), pair_(std::move(pair)) {}

double ValueFunction::operator()(double x) const {
    if (const auto* c = partition_.component(x)) return c->A * pair_.phi(x) + c->B * pair_.psi(x);
    return g_(x);
}

double ValueFunction::d_left(double x) const {
    for (const auto& c : partition_.continuation) {
        if (x > c.lo && x <= c.hi) return c.A * pair_.dphi(x) + c.B * pair_.dpsi(x);
    }
    return g_.d_left(x);
}

double ValueFunction::d_right(double x) const {
    for (const auto& c : partition_.continuation) {
        if (x >= c.lo && x < c.hi) return c.A * pair_.dphi(x) + c.B * pair_.dpsi(x);
    }
    return g_.d_right(x);
}

ValueFunction assemble(const Solution& solution, const PayoffDC& g, const FundamentalPair& pair) {
    const Interval dom = pair.diffusion().interval;
    for (const auto& c : solution.partition.continuation) {
        for (double x : {c.lo, c.hi}) {
            if (!std::isfinite(x) || x <= dom.lo || x >= dom.hi) continue;
            const double vx = c.A * pair.phi(x) + c.B * pair.psi(x);
            const double gx = g(x);
            if (std::abs(vx - gx) > 1e-10 * std::max({1.0, std::abs(gx), std::abs(vx)})) {
                throw StoppingError(ErrorCode::ContinuityViolation, "v = " + fmt(vx) + " but g = " + fmt(gx) +
                                                                        " at the boundary " + fmt(x));
            }
        }
    }
    return ValueFunction(solution.partition, g, pair);
}

bool VerificationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::vector<double> verification_grid(const ValueFunction& v, int n) {
    const auto& spec = v.pair().diffusion();
    std::vector<double> extra(v.payoff().breakpoints().begin(), v.payoff().breakpoints().end());
    for (double b : v.partition().boundaries()) {
        extra.push_back(b);
        const double h = 1e-7 * std::max(1.0, std::abs(b));
        extra.push_back(b - h);
        extra.push_back(b + h);
    }
    return scan_grid(spec.window, n, extra);
}

VerificationReport verify_solution(const ValueFunction& v, std::span<const double> grid, double tol) {
    const auto& g = v.payoff();
    const auto& pair = v.pair();
    const auto& spec = pair.diffusion();
    const auto& part = v.partition();
    VerificationReport rep;

    auto note = [](CheckResult& c, double scaled, double x) {
        if (scaled > c.worst) {
            c.worst = scaled;
            c.worst_x = x;
        }
        if (scaled > 0) c.pass = false;
    };

    // HJB1: L v <= 0 on D. Inside D, L v = L g; at a boundary, L v has the
    // atom 1/2 sigma^2 (v'_+ - v'_-).
    CheckResult hjb1{"HJB1", true, -kInf, 0, ""};
    for (double x : grid) {
        if (!part.in_stopping(x) || part.component(x)) continue;
        const bool interior = std::any_of(part.stopping.begin(), part.stopping.end(),
                                          [x](const auto& s) { return x > s.lo && x < s.hi; });
        if (!interior) continue;
        const auto& p = g.pieces()[g.piece_index(x)];
        const double s2 = spec.sigma2(x);
        const double dens = 0.5 * s2 * p.d2(x) + spec.drift(x) * p.d1(x) - spec.discount(x) * p.f(x);
        note(hjb1, dens / (1 + std::abs(g(x))) - tol, x);
    }
    std::vector<double> atoms(g.breakpoints().begin(), g.breakpoints().end());
    for (double b : part.boundaries()) atoms.push_back(b);
    for (double x : atoms) {
        if (!part.in_stopping(x) || part.component(x)) continue;
        const double atom = 0.5 * spec.sigma2(x) * (v.d_right(x) - v.d_left(x));
        note(hjb1, atom / (1 + std::abs(g(x))) - tol, x);
    }
    hjb1.detail = "max scaled L v on the stopping set";
    rep.checks.push_back(hjb1);

    // HJB2: v >= g, including left limits at jumps inside C
    CheckResult hjb2{"HJB2", true, -kInf, 0, ""};
    for (double x : grid) {
        const double vx = v(x);
        note(hjb2, (g(x) - vx) / (1 + std::abs(g(x))) - tol, x);
        if (part.component(x)) note(hjb2, (g.left_limit(x) - vx) / (1 + std::abs(g(x))) - tol, x);
    }
    hjb2.detail = "max scaled g - v";
    rep.checks.push_back(hjb2);

    // HJB3: boundary points (where L v may charge mass) belong to D
    CheckResult hjb3{"HJB3", true, 0, 0, ""};
    for (double b : part.boundaries()) {
        if (!part.in_stopping(b) || part.component(b)) {
            hjb3.pass = false;
            hjb3.worst_x = b;
            hjb3.detail = "boundary " + fmt(b) + " lies in the continuation region";
        }
    }
    if (hjb3.pass) hjb3.detail = "all boundary atoms sit in the stopping set";
    rep.checks.push_back(hjb3);

    // ODE residual of v on C; v'' by Richardson-extrapolated central
    // differences of the exact v'
    CheckResult ode{"ode-residual", true, -kInf, 0, ""};
    for (double x : grid) {
        const auto* c = part.component(x);
        if (!c) continue;
        const double h = 1e-4 * (spec.window.log_scaled() ? x : std::max(1.0, std::abs(x)));
        if (!(x - h > c->lo && x + h < c->hi)) continue;
        auto dv = [&](double y) { return c->A * pair.dphi(y) + c->B * pair.dpsi(y); };
        const double d2h = (dv(x + h) - dv(x - h)) / (2 * h);
        const double d2h2 = (dv(x + h / 2) - dv(x - h / 2)) / h;
        const double d2 = (4 * d2h2 - d2h) / 3;
        const double vx = v(x), d1 = dv(x);
        const double res = 0.5 * spec.sigma2(x) * d2 + spec.drift(x) * d1 - spec.discount(x) * vx;
        const double scale = std::abs(spec.discount(x) * vx) + std::abs(spec.drift(x) * d1) +
                             std::abs(0.5 * spec.sigma2(x) * d2) + 1e-300;
        note(ode, std::abs(res) / scale - 1e-6, x);
    }
    ode.detail = "max |L v| / scale on C (finite-difference v'')";
    rep.checks.push_back(ode);

    CheckResult growth{"w-domin", true, 0, 0, ""};
    for (double x : grid) {
        const double c = std::abs(v(x)) / (1 + std::abs(g(x)));
        if (!std::isfinite(c)) {
            growth.pass = false;
            growth.worst_x = x;
        }
        if (c > rep.growth_constant) {
            rep.growth_constant = c;
            growth.worst_x = x;
        }
    }
    growth.worst = rep.growth_constant;
    growth.detail = "|v| <= C (1 + |g|) with sampled C = " + fmt(rep.growth_constant);
    rep.checks.push_back(growth);
    return rep;
}

std::vector<SmoothFitGap> smooth_fit_report(const ValueFunction& v, double tol) {
    const auto& g = v.payoff();
    std::vector<SmoothFitGap> out;
    for (double x : v.partition().boundaries()) {
        const double vl = v.d_left(x), vr = v.d_right(x);
        const double gl = g.d_left(x), gr = g.d_right(x);
        const double scale = 1 + std::abs(gl) + std::abs(gr);
        SmoothFitGap s{x, vl - gl, gr - vr, jump_at(g, x) != 0, false, false};
        s.smooth = !s.value_jump && std::abs(vl - gl) <= tol * scale && std::abs(vr - gr) <= tol * scale;
        s.holds = (s.value_jump || s.left_gap <= tol * scale) && s.right_gap <= tol * scale && vr <= vl + tol * scale;
        out.push_back(s);
    }
    return out;
}

}  // namespace dcstop
