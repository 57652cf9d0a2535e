#include "dcstop/boundary_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace dcstop {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}

template <class F>
double toms748(F f, double lo, double hi, double flo, double fhi) {
    boost::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(std::abs(a), std::abs(b)); };
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (r.first + r.second);
}

bool smooth_at(const PayoffDC& g, double x) {
    const auto br = g.breakpoints();
    const auto it = std::find(br.begin(), br.end(), x);
    if (it == br.end()) return true;
    const auto i = static_cast<std::size_t>(it - br.begin());
    const double dl = g.d_left(x), dr = g.d_right(x);
    return g.value_jump(i) == 0 && std::abs(dl - dr) <= 1e-12 * (1 + std::abs(dl));
}

// Next probe outward from x when searching beyond the tabulated window.
double widen(const Interval& window, double x, int k) {
    if (window.log_scaled()) return x * 10.0;
    return x + (window.hi - window.lo) * std::pow(2.0, k);
}

}  // namespace

QFunctionals::QFunctionals(const SignedMeasure& mu, const FundamentalPair& pair, int nodes)
    : pair_(&pair),
      phi_(mu, [&pair](double x) { return pair.green_norm() * pair.cap_phi(x); },
           CumulativeIntegral::Anchor::Right, scan_grid(pair.diffusion().window, nodes, mu.breakpoints()),
           pair.support()),
      psi_(mu, [&pair](double x) { return pair.green_norm() * pair.cap_psi(x); },
           CumulativeIntegral::Anchor::Left, scan_grid(pair.diffusion().window, nodes, mu.breakpoints()),
           pair.support()) {}

double QFunctionals::q_phi_open(double y, double z) const { return phi_.open(y) - phi_.closed(z); }
double QFunctionals::q_phi_closed(double y, double z) const { return phi_.closed(y) - phi_.open(z); }
double QFunctionals::q_psi_open(double y, double z) const { return psi_.open(z) - psi_.closed(y); }
double QFunctionals::q_psi_closed(double y, double z) const { return psi_.closed(z) - psi_.open(y); }

double QFunctionals::phi_tail(double x, End end) const { return end == End::Closed ? phi_.closed(x) : phi_.open(x); }
double QFunctionals::psi_head(double x, End end) const { return end == End::Closed ? psi_.closed(x) : psi_.open(x); }

namespace {

// Integral over [u, z] (closed) or [u, z[ (open) of the q-weight.
template <class Closed, class Open>
LValue l_map(double u, double z_min, const QFunctionals& q, Closed upto_closed, Open upto_open) {
    if (u > z_min) throw StoppingError(ErrorCode::InvalidArgument, "l-map start " + fmt(u) + " lies above " + fmt(z_min));
    const double qc = upto_closed(z_min);
    if (qc < 0) return {z_min, LStatus::NoRoot};
    if (qc == 0) return {z_min, upto_open(z_min) == 0 ? LStatus::Root : LStatus::AtomStraddle};

    // L g <= 0 beyond z_min, so the integral decreases from here on
    const Interval& window = q.pair().diffusion().window;
    const Interval support = q.pair().support();
    double lo = z_min;
    double hi = lo;
    double fhi = qc;
    const std::vector<double> nodes = scan_grid(window, 512, std::vector<double>{z_min});
    for (double x : nodes) {
        if (x <= z_min) continue;
        hi = x;
        fhi = upto_closed(x);
        if (fhi <= 0) break;
        lo = x;
    }
    for (int k = 0; fhi > 0 && k < 12; ++k) {
        const double next = widen(window, hi, k);
        if (!(next < support.hi)) break;
        lo = hi;
        hi = next;
        fhi = upto_closed(hi);
    }
    if (fhi > 0) return {hi, LStatus::AtTruncation};
    if (fhi == 0) return {hi, LStatus::Root};
    const double flo = upto_closed(lo);
    if (flo <= 0) return {lo, LStatus::Root};
    return {toms748([&](double z) { return upto_closed(z); }, lo, hi, flo, fhi), LStatus::Root};
}

}  // namespace

LValue l_phi_map(double u, const QFunctionals& q, double z_min) {
    const double start = q.phi_tail(u, End::Closed);
    return l_map(
        u, z_min, q, [&](double z) { return start - q.phi_tail(z, End::Open); },
        [&](double z) { return start - q.phi_tail(z, End::Closed); });
}

LValue l_psi_map(double u, const QFunctionals& q, double z_min) {
    const double start = q.psi_head(u, End::Open);
    return l_map(
        u, z_min, q, [&](double z) { return q.psi_head(z, End::Closed) - start; },
        [&](double z) { return q.psi_head(z, End::Open) - start; });
}

std::pair<double, double> fit_two_points(const FundamentalPair& pair, double y, double gy, double z, double gz) {
    const double py = pair.phi(y), sy = pair.psi(y), pz = pair.phi(z), sz = pair.psi(z);
    const double det = pz * sy - py * sz;
    if (!(std::abs(det) > 1e-14 * (std::abs(pz * sy) + std::abs(py * sz)))) {
        throw StoppingError(ErrorCode::SingularFitSystem,
                            "fit matrix at (" + fmt(y) + ", " + fmt(z) + ") is singular, det = " + fmt(det));
    }
    return {(gz * sy - gy * sz) / det, (gy * pz - gz * py) / det};
}

Solution solve_case_I(const FundamentalPair& pair) {
    Solution s;
    s.label = CaseLabel::I;
    s.evidence = "never stop";
    const Interval dom = pair.diffusion().interval;
    s.partition = {dom, {{dom.lo, dom.hi, 0.0, 0.0}}, {}};
    return s;
}

Solution solve_case_II(const FundamentalPair& pair) {
    Solution s;
    s.label = CaseLabel::II;
    s.evidence = "stop immediately";
    const Interval dom = pair.diffusion().interval;
    s.partition = {dom, {}, {{dom.lo, dom.hi}}};
    return s;
}

Solution solve_case_III(const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair) {
    if (!tp.psi) throw StoppingError(ErrorCode::InvalidArgument, "Case III needs the turning point of g/psi");
    if (!tp.psi->global) {
        throw StoppingError(ErrorCode::Unclassifiable, "x_psi = " + fmt(tp.psi->location) + " is not a global maximum");
    }
    const double x = tp.psi->location;
    const double B = g(x) / pair.psi(x);
    if (!(B > 0)) throw StoppingError(ErrorCode::NonpositiveB, "B = g/psi(x_psi) = " + fmt(B) + " at " + fmt(x));
    Solution s;
    s.label = CaseLabel::III;
    const Interval dom = pair.diffusion().interval;
    s.partition = {dom, {{dom.lo, x, 0.0, B}}, {{x, dom.hi}}};
    s.boundaries = {{x, smooth_at(g, x)}};
    s.evidence = "upper threshold at x_psi = " + fmt(x);
    return s;
}

Solution solve_case_IV(const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair) {
    if (!tp.phi) throw StoppingError(ErrorCode::InvalidArgument, "Case IV needs the turning point of g/phi");
    if (!tp.phi->global) {
        throw StoppingError(ErrorCode::Unclassifiable, "x_phi = " + fmt(tp.phi->location) + " is not a global maximum");
    }
    const double x = tp.phi->location;
    const double A = g(x) / pair.phi(x);
    if (!(A > 0)) throw StoppingError(ErrorCode::NonpositiveA, "A = g/phi(x_phi) = " + fmt(A) + " at " + fmt(x));
    Solution s;
    s.label = CaseLabel::IV;
    const Interval dom = pair.diffusion().interval;
    s.partition = {dom, {{x, dom.hi, A, 0.0}}, {{dom.lo, x}}};
    s.boundaries = {{x, smooth_at(g, x)}};
    s.evidence = "lower threshold at x_phi = " + fmt(x);
    return s;
}

Solution solve_case_V(const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair) {
    if (!tp.psi || !tp.phi) throw StoppingError(ErrorCode::InvalidArgument, "Case V needs both turning points");
    const double xl = tp.psi->location, xr = tp.phi->location;
    if (xl > xr) {
        throw StoppingError(ErrorCode::OrderViolation, "x_psi = " + fmt(xl) + " exceeds x_phi = " + fmt(xr));
    }
    const double B = g(xl) / pair.psi(xl), A = g(xr) / pair.phi(xr);
    if (!(B > 0)) throw StoppingError(ErrorCode::NonpositiveB, "B = " + fmt(B) + " at x_psi = " + fmt(xl));
    if (!(A > 0)) throw StoppingError(ErrorCode::NonpositiveA, "A = " + fmt(A) + " at x_phi = " + fmt(xr));
    Solution s;
    s.label = CaseLabel::V;
    const Interval dom = pair.diffusion().interval;
    s.partition = {dom, {{dom.lo, xl, 0.0, B}, {xr, dom.hi, A, 0.0}}, {{xl, xr}}};
    s.boundaries = {{xl, smooth_at(g, xl)}, {xr, smooth_at(g, xr)}};
    s.evidence = "stopping band [" + fmt(xl) + ", " + fmt(xr) + "]";
    return s;
}

Solution solve_case_VI(const QFunctionals& q, const SignPattern& pattern, const TurningPoints& tp, const PayoffDC& g,
                       bool inferred) {
    if (!pattern.x_l || !pattern.x_r) throw StoppingError(ErrorCode::InvalidArgument, "Case VI needs x_l and x_r");
    const FundamentalPair& pair = q.pair();
    const double xl = *pattern.x_l, xr = *pattern.x_r;
    for (const auto& atom : q.measure().atoms()) {
        if (atom.location < xl || atom.location > xr) {
            throw StoppingError(ErrorCode::AtomStraddle,
                                "L g has an atom at " + fmt(atom.location) + " outside [x_l, x_r]; Case VI needs it atom-free there");
        }
    }

    const Interval window = pair.diffusion().window;
    double u_hi = xl;
    if (tp.phi) u_hi = std::min(u_hi, tp.phi->location);
    const double u_lo = std::max(window.lo, pair.support().lo);
    if (!(u_lo < u_hi)) throw StoppingError(ErrorCode::NoCrossing, "empty admissible range for the left boundary");

    // sign of l_phi(u) - l_psi(u); nullopt where undefined
    struct DeltaValue {
        double value;
        int sign;
    };
    auto delta = [&](double u) -> std::optional<DeltaValue> {
        const LValue lp = l_phi_map(u, q, xr), ls = l_psi_map(u, q, xr);
        if (lp.status == LStatus::NoRoot || ls.status == LStatus::NoRoot) return std::nullopt;
        const bool tp_ = lp.status == LStatus::AtTruncation, ts = ls.status == LStatus::AtTruncation;
        if (tp_ && ts) return std::nullopt;
        if (tp_) return DeltaValue{kInf, 1};
        if (ts) return DeltaValue{-kInf, -1};
        const double d = lp.z - ls.z;
        return DeltaValue{d, d > 0 ? 1 : (d < 0 ? -1 : 0)};
    };

    CaseVIDiagnostics diag;
    const Interval range{u_lo, u_hi};
    const auto us = scan_grid(range, 241);
    std::vector<std::pair<double, int>> signs;
    for (double u : us) {
        const auto d = delta(u);
        if (!d) continue;
        diag.delta_samples.emplace_back(u, d->value);
        signs.emplace_back(u, d->sign);
    }
    std::vector<std::pair<double, double>> brackets;
    for (std::size_t i = 0; i + 1 < signs.size(); ++i) {
        if (signs[i].second == 0) brackets.emplace_back(signs[i].first, signs[i].first);
        else if (signs[i].second * signs[i + 1].second < 0) brackets.emplace_back(signs[i].first, signs[i + 1].first);
    }
    if (!signs.empty() && signs.back().second == 0) brackets.emplace_back(signs.back().first, signs.back().first);
    if (brackets.empty()) {
        throw StoppingError(ErrorCode::NoCrossing, "l_phi - l_psi keeps one sign over [" + fmt(u_lo) + ", " +
                                                       fmt(u_hi) + "] (" + std::to_string(signs.size()) +
                                                       " defined samples)");
    }
    if (brackets.size() > 1) {
        std::ostringstream os;
        os << "l_phi - l_psi changes sign " << brackets.size() << " times, near";
        for (const auto& b : brackets) os << ' ' << fmt(b.first);
        throw StoppingError(ErrorCode::MultipleCrossings, os.str());
    }

    // bisection on the sign, then a secant polish where both ends are finite
    auto [lo, hi] = brackets.front();
    if (lo != hi) {
        const int slo = delta(lo)->sign;
        for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            const auto d = delta(mid);
            if (!d) throw StoppingError(ErrorCode::NoCrossing, "l-maps undefined inside the crossing bracket at " + fmt(mid));
            if (d->sign == 0) {
                lo = hi = mid;
                break;
            }
            (d->sign == slo ? lo : hi) = mid;
        }
    }
    const double a = 0.5 * (lo + hi);
    const LValue lp = l_phi_map(a, q, xr), ls = l_psi_map(a, q, xr);
    if (lp.status == LStatus::AtTruncation || ls.status == LStatus::AtTruncation) {
        throw StoppingError(ErrorCode::NoCrossing, "crossing at u = " + fmt(a) + " runs into the truncation");
    }
    const double b = 0.5 * (lp.z + ls.z);
    const auto [A, B] = fit_two_points(pair, a, g(a), b, g(b));

    diag.q_phi_open = q.q_phi_open(a, b);
    diag.q_phi_closed = q.q_phi_closed(a, b);
    diag.q_psi_open = q.q_psi_open(a, b);
    diag.q_psi_closed = q.q_psi_closed(a, b);
    diag.A_integral = -q.psi_head(a, End::Closed);
    diag.B_integral = -q.phi_tail(a, End::Closed);
    diag.slope_ratio = pair.phi(a) * pair.psi(b) / (pair.phi(b) * pair.psi(a));
    const double h = 1e-4 * (std::abs(a) + 1e-3);
    if (a + h <= u_hi) {
        const double dphi = l_phi_map(a + h, q, xr).z - l_phi_map(a - h, q, xr).z;
        const double dpsi = l_psi_map(a + h, q, xr).z - l_psi_map(a - h, q, xr).z;
        diag.slope_ratio_numeric = dphi / dpsi;
    }

    const double kappa = pair.green_norm();
    const auto& mu = q.measure();
    const double tol_phi = 1e-8 * integrate_variation(mu, [&](double x) { return kappa * pair.cap_phi(x); }, a, b,
                                                       pair.support());
    const double tol_psi = 1e-8 * integrate_variation(mu, [&](double x) { return kappa * pair.cap_psi(x); }, a, b,
                                                       pair.support());
    const bool q_ok = diag.q_phi_open >= -tol_phi && diag.q_phi_closed <= tol_phi && diag.q_psi_open >= -tol_psi &&
                      diag.q_psi_closed <= tol_psi;
    if (!q_ok) {
        throw StoppingError(ErrorCode::NoCrossing,
                            "crossing (" + fmt(a) + ", " + fmt(b) + ") violates the q-inequalities: q_phi = (" +
                                fmt(diag.q_phi_open) + ", " + fmt(diag.q_phi_closed) + "), q_psi = (" +
                                fmt(diag.q_psi_open) + ", " + fmt(diag.q_psi_closed) + ")");
    }
    const double ctol = 1e-10 * (std::abs(A) + std::abs(B) + 1e-300);
    if (A < -ctol || B < -ctol) {
        throw StoppingError(ErrorCode::NegativeCoefficient,
                            "A = " + fmt(A) + ", B = " + fmt(B) + " at (" + fmt(a) + ", " + fmt(b) + ")");
    }

    Solution s;
    s.label = CaseLabel::VI;
    s.inferred = inferred;
    const Interval dom = pair.diffusion().interval;
    s.partition = {dom, {{a, b, A, B}}, {{dom.lo, a}, {b, dom.hi}}};
    s.pair = BoundaryPair{a, b, A, B, smooth_at(g, a), smooth_at(g, b)};
    s.boundaries = {{a, smooth_at(g, a)}, {b, smooth_at(g, b)}};
    s.vi = std::move(diag);
    s.evidence = "l_phi crosses l_psi at u = " + fmt(a);
    return s;
}

CaseLabel label_from_partition(const RegionPartition& p) {
    const auto& c = p.continuation;
    if (p.stopping.empty()) return CaseLabel::I;
    if (c.empty()) return CaseLabel::II;
    const bool at_lo = c.front().lo <= p.domain.lo, at_hi = c.back().hi >= p.domain.hi;
    if (c.size() == 1) {
        if (at_lo && !at_hi) return CaseLabel::III;
        if (!at_lo && at_hi) return CaseLabel::IV;
        if (!at_lo && !at_hi) return CaseLabel::VI;
        return CaseLabel::I;
    }
    if (c.size() == 2 && at_lo && at_hi && p.stopping.size() == 1) return CaseLabel::V;
    return CaseLabel::Composite;
}

namespace {

struct Component {
    double lo, hi;
    bool lo_free, hi_free;  // end sits on a smooth part of g and may move
};

}  // namespace

Solution paste_intervals(const PayoffDC& g, const FundamentalPair& pair, int points) {
    const Interval dom = pair.diffusion().interval;
    const Interval window = pair.diffusion().window;
    const auto xs = scan_grid(window, points, g.breakpoints());
    const std::size_t n = xs.size();
    std::vector<double> F(n), H(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = pair.phi(xs[i]);
        F[i] = pair.psi(xs[i]) / p;
        H[i] = g(xs[i]) / p;
    }

    // upper hull over the samples plus (0, 0), the limit at alpha
    constexpr long kOrigin = -1;
    auto fx = [&](long i) { return i == kOrigin ? 0.0 : F[static_cast<std::size_t>(i)]; };
    auto hx = [&](long i) { return i == kOrigin ? 0.0 : H[static_cast<std::size_t>(i)]; };
    std::vector<long> hull{kOrigin};
    for (long i = 0; i < static_cast<long>(n); ++i) {
        while (hull.size() >= 2) {
            const long o = hull[hull.size() - 2], m = hull.back();
            const double t1 = (fx(m) - fx(o)) * (hx(i) - hx(o));
            const double t2 = (hx(m) - hx(o)) * (fx(i) - fx(o));
            if (t1 - t2 > 1e-12 * (std::abs(t1) + std::abs(t2))) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }
    // the majorant is nondecreasing: drop everything past the last maximum
    double hmax = 0;
    for (long i : hull) hmax = std::max(hmax, hx(i));
    while (!hull.empty() && hx(hull.back()) < hmax * (1 - 1e-12)) hull.pop_back();
    if (hmax <= 0) return solve_case_I(pair);

    std::vector<Component> comps;
    for (long i : hull) {
        if (i == kOrigin) continue;
        const double x = xs[static_cast<std::size_t>(i)];
        if (!comps.empty() && i > 0 && comps.back().hi == xs[static_cast<std::size_t>(i - 1)]) {
            comps.back().hi = x;
        } else {
            comps.push_back({x, x, false, false});
        }
    }
    for (auto& c : comps) {
        c.lo_free = smooth_at(g, c.lo) && c.lo > window.lo;
        c.hi_free = smooth_at(g, c.hi) && c.hi < window.hi;
        if (c.lo <= window.lo) c.lo = dom.lo;
        if (c.hi >= window.hi) c.hi = dom.hi;
    }

    auto neighbours = [&](double x) {
        auto it = std::lower_bound(xs.begin(), xs.end(), x);
        const std::size_t k = static_cast<std::size_t>(it - xs.begin());
        return std::pair{xs[k > 0 ? k - 1 : 0], xs[std::min(k + 1, n - 1)]};
    };
    // v' - g' at the moving contact t, v fitted through t and the fixed end
    auto contact_gap = [&](double t, std::optional<double> fixed, bool fixed_left) {
        double A = 0, B = 0;
        if (!fixed) {
            if (fixed_left) B = g(t) / pair.psi(t);  // ]alpha, t[
            else A = g(t) / pair.phi(t);             // ]t, beta[
        } else if (fixed_left) {
            std::tie(A, B) = fit_two_points(pair, *fixed, g(*fixed), t, g(t));
        } else {
            std::tie(A, B) = fit_two_points(pair, t, g(t), *fixed, g(*fixed));
        }
        const double dv = A * pair.dphi(t) + B * pair.dpsi(t);
        return dv - (fixed_left ? g.d_left(t) : g.d_right(t));
    };
    auto refine = [&](double t, std::optional<double> fixed, bool fixed_left) {
        auto [lo, hi] = neighbours(t);
        if (fixed) {
            if (fixed_left) lo = std::max(lo, std::nextafter(*fixed, kInf));
            else hi = std::min(hi, std::nextafter(*fixed, -kInf));
        }
        auto f = [&](double x) { return contact_gap(x, fixed, fixed_left); };
        const double flo = f(lo), fhi = f(hi);
        if (!(flo * fhi < 0)) return t;
        return toms748(f, lo, hi, flo, fhi);
    };
    for (int sweep = 0; sweep < 4; ++sweep) {
        for (std::size_t k = 0; k < comps.size(); ++k) {
            auto& c = comps[k];
            if (c.lo_free) {
                std::optional<double> left;
                if (k > 0) left = comps[k - 1].hi;
                c.lo = refine(c.lo, left, true);
            }
            if (c.hi_free) {
                std::optional<double> right;
                if (k + 1 < comps.size()) right = comps[k + 1].lo;
                c.hi = refine(c.hi, right, false);
            }
        }
    }

    Solution s;
    s.partition.domain = dom;
    auto boundary = [&](double x, double A, double B, bool cont_left) {
        const double dv = A * pair.dphi(x) + B * pair.dpsi(x);
        const double dg = cont_left ? g.d_left(x) : g.d_right(x);
        const bool jump = cont_left ? g.left_limit(x) != g(x) : false;
        s.boundaries.push_back({x, !jump && std::abs(dv - dg) <= 1e-6 * (1 + std::abs(dg))});
    };
    if (comps.front().lo > dom.lo) {
        const double x = comps.front().lo;
        const double B = g(x) / pair.psi(x);
        s.partition.continuation.push_back({dom.lo, x, 0.0, B});
        boundary(x, 0.0, B, true);
    }
    for (std::size_t k = 0; k < comps.size(); ++k) {
        s.partition.stopping.push_back({comps[k].lo, comps[k].hi});
        if (k + 1 < comps.size()) {
            const double y = comps[k].hi, z = comps[k + 1].lo;
            const auto [A, B] = fit_two_points(pair, y, g(y), z, g(z));
            s.partition.continuation.push_back({y, z, A, B});
            boundary(y, A, B, false);
            boundary(z, A, B, true);
        }
    }
    if (comps.back().hi < dom.hi) {
        const double x = comps.back().hi;
        const double A = g(x) / pair.phi(x);
        s.partition.continuation.push_back({x, dom.hi, A, 0.0});
        boundary(x, A, 0.0, false);
    }
    std::sort(s.partition.continuation.begin(), s.partition.continuation.end(),
              [](const auto& l, const auto& r) { return l.lo < r.lo; });
    std::sort(s.boundaries.begin(), s.boundaries.end(), [](const auto& l, const auto& r) { return l.x < r.x; });
    s.label = label_from_partition(s.partition);
    s.evidence = "concave majorant of g/phi in psi/phi: " + std::to_string(comps.size()) + " stopping component(s)";
    return s;
}

}  // namespace dcstop
