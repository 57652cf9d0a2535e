#include "dcstop/payoff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "dcstop/interp.hpp"

namespace dcstop {

Piece polynomial(std::vector<double> c) {
    auto eval = [](const std::vector<double>& k, double x) {
        double v = 0;
        for (std::size_t i = k.size(); i-- > 0;) v = v * x + k[i];
        return v;
    };
    std::vector<double> c1, c2;
    for (std::size_t i = 1; i < c.size(); ++i) c1.push_back(c[i] * static_cast<double>(i));
    for (std::size_t i = 1; i < c1.size(); ++i) c2.push_back(c1[i] * static_cast<double>(i));
    return {[c, eval](double x) { return eval(c, x); }, [c1, eval](double x) { return eval(c1, x); },
            [c2, eval](double x) { return eval(c2, x); }};
}

Piece power_term(double c, double p) {
    return {[c, p](double x) { return c * std::pow(x, p); },
            [c, p](double x) { return p == 0 ? 0.0 : c * p * std::pow(x, p - 1); },
            [c, p](double x) { return (p == 0 || p == 1) ? 0.0 : c * p * (p - 1) * std::pow(x, p - 2); }};
}

Piece exp_term(double c, double k) {
    return {[c, k](double x) { return c * std::exp(k * x); }, [c, k](double x) { return c * k * std::exp(k * x); },
            [c, k](double x) { return c * k * k * std::exp(k * x); }};
}

Piece constant_piece(double c) {
    return {[c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

Piece operator+(const Piece& a, const Piece& b) {
    return {[a, b](double x) { return a.f(x) + b.f(x); }, [a, b](double x) { return a.d1(x) + b.d1(x); },
            [a, b](double x) { return a.d2(x) + b.d2(x); }};
}

Piece scaled(const Piece& p, double s) {
    return {[p, s](double x) { return s * p.f(x); }, [p, s](double x) { return s * p.d1(x); },
            [p, s](double x) { return s * p.d2(x); }};
}

PayoffDC::PayoffDC(std::vector<double> breakpoints, std::vector<Piece> pieces, bool staircase)
    : breaks_(std::move(breakpoints)), pieces_(std::move(pieces)), staircase_(staircase) {
    if (pieces_.size() != breaks_.size() + 1) {
        throw StoppingError(ErrorCode::InvalidArgument, "payoff needs exactly one more piece than breakpoints");
    }
    if (!std::is_sorted(breaks_.begin(), breaks_.end()) ||
        std::adjacent_find(breaks_.begin(), breaks_.end()) != breaks_.end()) {
        throw StoppingError(ErrorCode::InvalidArgument, "breakpoints must be strictly increasing");
    }
    if (!staircase_ && has_value_jumps(1e-10)) {
        throw StoppingError(ErrorCode::StaircaseModeRequired, "payoff jumps at a breakpoint; enable staircase mode");
    }
}

std::size_t PayoffDC::piece_index(double x) const {
    return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin());
}

double PayoffDC::operator()(double x) const { return pieces_[piece_index(x)].f(x); }

double PayoffDC::left_limit(double x) const {
    const auto i = piece_index(x);
    if (i > 0 && breaks_[i - 1] == x) return pieces_[i - 1].f(x);
    return pieces_[i].f(x);
}

double PayoffDC::d_right(double x) const { return pieces_[piece_index(x)].d1(x); }

double PayoffDC::d_left(double x) const {
    const auto i = piece_index(x);
    if (i > 0 && breaks_[i - 1] == x) return pieces_[i - 1].d1(x);
    return pieces_[i].d1(x);
}

double PayoffDC::d2(double x) const { return pieces_[piece_index(x)].d2(x); }

double PayoffDC::value_jump(std::size_t i) const {
    const double y = breaks_.at(i);
    return pieces_[i + 1].f(y) - pieces_[i].f(y);
}

double PayoffDC::kink_jump(std::size_t i) const {
    const double y = breaks_.at(i);
    return pieces_[i + 1].d1(y) - pieces_[i].d1(y);
}

bool PayoffDC::has_value_jumps(double tol) const {
    for (std::size_t i = 0; i < breaks_.size(); ++i) {
        const double y = breaks_[i];
        if (std::abs(value_jump(i)) > tol * (1 + std::abs(pieces_[i].f(y)))) return true;
    }
    return false;
}

SignedMeasure lop_measure(const PayoffDC& g, const DiffusionSpec& spec) {
    if (g.has_value_jumps(1e-10)) {
        throw StoppingError(ErrorCode::StaircaseModeRequired,
                            "L g is not a measure for a discontinuous payoff; use interval pasting");
    }
    const Interval dom = spec.interval;
    const auto br = g.breakpoints();
    std::vector<DensitySegment> segs;
    for (std::size_t i = 0; i < g.pieces().size(); ++i) {
        const double lo = std::max(i == 0 ? dom.lo : br[i - 1], dom.lo);
        const double hi = std::min(i == br.size() ? dom.hi : br[i], dom.hi);
        if (!(lo < hi)) continue;
        const Piece p = g.pieces()[i];
        segs.push_back({lo, hi, [p, spec](double x) {
                            return 0.5 * spec.sigma2(x) * p.d2(x) + spec.drift(x) * p.d1(x) -
                                   spec.discount(x) * p.f(x);
                        }});
    }
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < br.size(); ++i) {
        if (!dom.contains(br[i])) continue;
        const double w = 0.5 * spec.sigma2(br[i]) * g.kink_jump(i);
        if (w != 0.0) atoms.push_back({br[i], w});
    }
    return SignedMeasure(dom, std::move(segs), std::move(atoms));
}

namespace {

// Geometric probe sequence from the anchor toward one end of the domain,
// clipped to the support of the pair.
std::vector<double> tail_probes(double anchor, double end, const Interval& support, int levels) {
    std::vector<double> out{anchor};
    const bool toward_lo = end < anchor;
    for (int k = 1; k <= levels; ++k) {
        double t;
        if (std::isfinite(end)) {
            t = end + (anchor - end) * std::pow(10.0, -k);
        } else {
            const double s = 1.0 + std::abs(anchor);
            t = toward_lo ? anchor - s * (std::pow(2.0, k) - 1) : anchor + s * (std::pow(2.0, k) - 1);
        }
        if (toward_lo ? t <= support.lo : t >= support.hi) break;
        out.push_back(t);
    }
    // Doubling ran into a truncated support after a handful of steps: space the
    // probes evenly up to just inside the support edge instead.
    const double edge = toward_lo ? support.lo : support.hi;
    const int enough = std::min(levels, 16);
    if (!std::isfinite(end) && std::isfinite(edge) && static_cast<int>(out.size()) <= enough / 2) {
        out.assign(1, anchor);
        const double reach = anchor + 0.995 * (edge - anchor);
        for (int k = 1; k <= enough; ++k) out.push_back(anchor + (reach - anchor) * k / enough);
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

TailDiagnostic probe_tail(const SignedMeasure& mu, const RealFn& w, double anchor, double end,
                          const Interval& support) {
    TailDiagnostic d;
    const auto t = tail_probes(anchor, end, support, 60);
    const bool toward_lo = end < anchor;
    std::vector<double> inc;
    double total = 0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double a = toward_lo ? t[k + 1] : t[k], b = toward_lo ? t[k] : t[k + 1];
        const double v = integrate_variation(mu, w, a, b, support, {1e-10, 15});
        inc.push_back(v);
        total += v;
        const std::size_t n = inc.size();
        // three successive increments below 1e-8 relative
        if (n >= 3) {
            const double scale = std::max(total, 1e-300);
            if (inc[n - 1] <= 1e-8 * scale && inc[n - 2] <= 1e-8 * scale && inc[n - 3] <= 1e-8 * scale) {
                d.converged = true;
                d.value = total;
                d.detail = "increments below 1e-8 after " + std::to_string(n) + " probes";
                return d;
            }
        }
        // stable geometric decay of the increments
        if (n >= 6 && inc[n - 5] > 0) {
            double lo = kInf, hi = -kInf;
            for (std::size_t j = n - 4; j < n; ++j) {
                const double rho = inc[j] / inc[j - 1];
                lo = std::min(lo, rho);
                hi = std::max(hi, rho);
            }
            if (hi < 1.0 - 1e-9 && hi - lo <= 0.02 * std::max(hi, 1e-12)) {
                d.converged = true;
                d.value = total + inc[n - 1] * hi / (1.0 - hi);
                d.detail = "geometric tail, increment ratio " + fmt(hi);
                return d;
            }
            if (lo >= 1.0 - 1e-9) {
                d.diverged = true;
                d.value = total;
                d.detail = "increments not decaying, ratio " + fmt(lo);
                return d;
            }
        }
    }
    if (t.size() < 61 && std::isfinite(toward_lo ? support.lo : support.hi) &&
        (toward_lo ? support.lo > mu.domain().lo : support.hi < mu.domain().hi)) {
        d.truncated = true;
        d.converged = std::isfinite(total);
        d.value = total;
        d.detail = "integral truncated at the tabulated support " + fmt(toward_lo ? support.lo : support.hi);
        return d;
    }
    d.value = total;
    d.detail = "inconclusive after " + std::to_string(inc.size()) + " probes";
    return d;
}

}  // namespace

IntegrabilityReport check_integrability(const SignedMeasure& mu, const FundamentalPair& pair) {
    IntegrabilityReport rep;
    const double anchor = pair.diffusion().window.midpoint();
    const Interval sup = pair.support();
    rep.left = probe_tail(mu, [&pair](double x) { return pair.cap_psi(x); }, anchor, mu.domain().lo, sup);
    rep.right = probe_tail(mu, [&pair](double x) { return pair.cap_phi(x); }, anchor, mu.domain().hi, sup);
    rep.integrable = rep.left.converged && rep.right.converged;
    return rep;
}

namespace {

bool ratio_vanishes(const std::vector<double>& rho) {
    if (rho.empty()) return false;
    if (rho.back() == 0.0) return true;
    if (rho.size() < 9) return false;
    std::vector<double> dl;
    for (std::size_t k = rho.size() - 9; k + 1 < rho.size(); ++k) {
        if (rho[k] <= 0.0) return false;
        dl.push_back(std::log(rho[k + 1]) - std::log(rho[k]));
    }
    const double mean = std::accumulate(dl.begin(), dl.end(), 0.0) / static_cast<double>(dl.size());
    const bool decreasing = std::all_of(dl.begin(), dl.end(), [](double v) { return v < -1e-9; });
    // log-slope must not fade away, otherwise the ratio levels off at a positive limit
    return decreasing && dl.back() <= 0.5 * mean;
}

}  // namespace

GrowthReport check_growth_limits(const PayoffDC& g, const FundamentalPair& pair) {
    GrowthReport rep;
    const Interval dom = pair.diffusion().interval;
    const Interval sup = pair.support();
    const double anchor = pair.diffusion().window.midpoint();
    auto side = [&](double end, const RealFn& f) {
        // probes strictly inside the support, fewer when it is truncated
        const auto t = tail_probes(anchor, end, sup, 40);
        std::vector<double> rho;
        for (double x : t) rho.push_back(std::abs(g(x)) / f(x));
        return ratio_vanishes(rho);
    };
    rep.left = side(dom.lo, [&pair](double x) { return pair.phi(x); });
    rep.right = side(dom.hi, [&pair](double x) { return pair.psi(x); });
    rep.limits_hold = rep.left && rep.right;
    rep.detail = std::string("|g|/phi -> 0 at alpha: ") + (rep.left ? "yes" : "no") +
                 ", |g|/psi -> 0 at beta: " + (rep.right ? "yes" : "no");
    return rep;
}

RepresentationReport representation_check(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                                          std::span<const double> grid) {
    RepresentationReport rep;
    const double k = pair.green_norm();
    const Interval sup = pair.support();
    const RealFn wpsi = [&pair](double x) { return pair.cap_psi(x); };
    const RealFn wphi = [&pair](double x) { return pair.cap_phi(x); };
    for (double x : grid) {
        const double left = integrate_measure(mu, wpsi, -kInf, End::Open, x, End::Open, sup);
        const double right = integrate_measure(mu, wphi, x, End::Closed, kInf, End::Open, sup);
        const double v = -k * (pair.phi(x) * left + pair.psi(x) * right);
        rep.reconstructed.push_back(v);
        const double err = std::abs(v - g(x)) / (1 + std::abs(g(x)));
        if (err > rep.max_error) {
            rep.max_error = err;
            rep.worst_x = x;
        }
    }
    return rep;
}

SlopeBrackets slope_functionals(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair, double x,
                                double tol) {
    const double k = pair.green_norm(), w = pair.wronskian(x);
    const Interval sup = pair.support();
    const RealFn wpsi = [&pair](double y) { return pair.cap_psi(y); };
    const RealFn wphi = [&pair](double y) { return pair.cap_phi(y); };
    const double gx = g(x), gp = g.d_right(x), gm = g.d_left(x);
    const double psi = pair.psi(x), dpsi = pair.dpsi(x), phi = pair.phi(x), dphi = pair.dphi(x);

    const double psi_closed = integrate_measure(mu, wpsi, -kInf, End::Open, x, End::Closed, sup);
    const double psi_open = integrate_measure(mu, wpsi, -kInf, End::Open, x, End::Open, sup);
    const double phi_open = integrate_measure(mu, wphi, x, End::Open, kInf, End::Open, sup);
    const double phi_closed = integrate_measure(mu, wphi, x, End::Closed, kInf, End::Open, sup);

    SlopeBrackets out{x, {}, 0.0};
    out.identities = {
        {"g'+ psi - g psi'", gp * psi - gx * dpsi, k * w * psi_closed},
        {"g'- psi - g psi'", gm * psi - gx * dpsi, k * w * psi_open},
        {"g'+ phi - g phi'", gp * phi - gx * dphi, -k * w * phi_open},
        {"g'- phi - g phi'", gm * phi - gx * dphi, -k * w * phi_closed},
    };
    // Mismatch relative to the bracket terms and the weighted variation of mu;
    // the latter keeps the scale honest where g vanishes locally.
    const double var = std::abs(k * w) * (integrate_variation(mu, wpsi, -kInf, x, sup) +
                                          integrate_variation(mu, wphi, x, kInf, sup));
    for (const auto& id : out.identities) {
        const double scale =
            std::abs(gx * dpsi) + std::abs(gp * psi) + std::abs(gx * dphi) + std::abs(gp * phi) + var;
        out.max_mismatch = std::max(out.max_mismatch, std::abs(id.lhs - id.rhs) / std::max(scale, 1e-300));
    }
    if (out.max_mismatch > tol) {
        throw StoppingError(ErrorCode::IdentityMismatch,
                            "slope identity mismatch " + fmt(out.max_mismatch) + " at x = " + fmt(x));
    }
    return out;
}

namespace {

// h = kappa (phi L + psi R) tabulated with h' = kappa (phi' L + psi' R).
struct RunningTable {
    FundamentalPair pair;
    PayoffDC running;
    std::unique_ptr<CumulativeIntegral> left, right;
    std::vector<double> x, h, dh;

    double direct(double v) const {
        return pair.green_norm() * (pair.phi(v) * left->open(v) + pair.psi(v) * right->closed(v));
    }
    double direct_d(double v) const {
        return pair.green_norm() * (pair.dphi(v) * left->open(v) + pair.dpsi(v) * right->closed(v));
    }
    // h'' from (L - r) h = -H using the running piece j
    double second(double v, double hv, double dhv, std::size_t j) const {
        const auto& s = pair.diffusion();
        return 2.0 * (s.discount(v) * hv - s.drift(v) * dhv - running.pieces()[j].f(v)) / s.sigma2(v);
    }
    detail::HermiteValue eval(double v, std::size_t j) const {
        if (v < x.front() || v > x.back()) return {direct(v), direct_d(v)};
        const std::size_t k = detail::locate_panel(x, v);
        return detail::quintic_hermite(x[k], x[k + 1], h[k], dh[k], second(x[k], h[k], dh[k], j), h[k + 1],
                                       dh[k + 1], second(x[k + 1], h[k + 1], dh[k + 1], j), v);
    }
};

}  // namespace

PayoffDC running_payoff_to_terminal(const PayoffDC& running, const PayoffDC& terminal, const FundamentalPair& pair,
                                    int nodes) {
    const auto& spec = pair.diffusion();
    const Interval dom = spec.interval;
    const auto hb = running.breakpoints();
    std::vector<DensitySegment> segs;
    for (std::size_t i = 0; i < running.pieces().size(); ++i) {
        const double lo = std::max(i == 0 ? dom.lo : hb[i - 1], dom.lo);
        const double hi = std::min(i == hb.size() ? dom.hi : hb[i], dom.hi);
        if (lo < hi) segs.push_back({lo, hi, running.pieces()[i].f});
    }
    const SignedMeasure mu_h(dom, std::move(segs), {});
    const auto integ = check_integrability(mu_h, pair);
    if (!integ.integrable) {
        throw StoppingError(ErrorCode::IntegrabilityFailure,
                            "running payoff is not (phi, psi)-integrable: " + integ.left.detail + "; " +
                                integ.right.detail);
    }

    auto table = std::make_shared<RunningTable>(RunningTable{pair, running, nullptr, nullptr, {}, {}, {}});
    const auto grid = scan_grid(spec.window, nodes, hb);
    table->left = std::make_unique<CumulativeIntegral>(
        mu_h, [pair](double v) { return pair.cap_psi(v); }, CumulativeIntegral::Anchor::Left, grid, pair.support());
    table->right = std::make_unique<CumulativeIntegral>(
        mu_h, [pair](double v) { return pair.cap_phi(v); }, CumulativeIntegral::Anchor::Right, grid, pair.support());
    for (double v : table->left->nodes()) {
        table->x.push_back(v);
        table->h.push_back(table->direct(v));
        table->dh.push_back(table->direct_d(v));
    }

    // breakpoints of g: union of both, pieces split accordingly
    std::vector<double> br(hb.begin(), hb.end());
    for (double b : terminal.breakpoints()) br.push_back(b);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i <= br.size(); ++i) {
        // pieces are right-continuous, so the piece starting at br[i-1] applies
        const std::size_t j = i == 0 ? 0 : running.piece_index(br[i - 1]);
        const Piece G = terminal.pieces()[i == 0 ? 0 : terminal.piece_index(br[i - 1])];
        pieces.push_back({[table, G, j](double v) { return table->eval(v, j).f - G.f(v); },
                          [table, G, j](double v) { return table->eval(v, j).df - G.d1(v); },
                          [table, G, j](double v) {
                              const auto e = table->eval(v, j);
                              return table->second(v, e.f, e.df, j) - G.d2(v);
                          }});
    }
    return PayoffDC(br, std::move(pieces), terminal.staircase());
}

}  // namespace dcstop
