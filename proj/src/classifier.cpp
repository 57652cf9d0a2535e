#include "dcstop/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcstop {

char to_char(Sign s) {
    switch (s) {
        case Sign::Negative: return '-';
        case Sign::Zero: return '0';
        case Sign::Positive: return '+';
    }
    return '?';
}

ScanOptions default_scan(const FundamentalPair& pair, int points) {
    return {pair.diffusion().window, points, 1e-10};
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}

Sign sign_of(double v, double tol) {
    if (v > tol) return Sign::Positive;
    if (v < -tol) return Sign::Negative;
    return Sign::Zero;
}

// Bisection for the point where `positive` switches from true (at a) to false
// (at b), to relative tolerance tol.
template <class Pred>
double bisect_switch(double a, double b, Pred positive, double tol) {
    for (int i = 0; i < 200 && std::abs(b - a) > tol * std::max(1.0, std::abs(a) + std::abs(b)) * 0.5; ++i) {
        const double m = 0.5 * (a + b);
        if (positive(m)) a = m;
        else b = m;
    }
    return 0.5 * (a + b);
}

struct SignedPiece {
    double lo, hi;
    Sign sign;
};

}  // namespace

SignPattern sign_partition(const SignedMeasure& mu, const ScanOptions& opts) {
    const Interval dom = mu.domain();
    std::vector<double> extra = mu.breakpoints();
    auto pts = scan_grid(opts.window, opts.points, extra);
    for (double b : extra) {
        if (dom.contains(b) && (b < opts.window.lo || b > opts.window.hi)) pts.push_back(b);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    auto segment_fn = [&mu](double mid) -> const RealFn* {
        for (const auto& s : mu.segments()) {
            if (mid >= s.lo && mid < s.hi) return &s.density;
        }
        return nullptr;
    };
    auto midpoint = [](double a, double b) { return (a > 0 && b / a > 4.0) ? std::sqrt(a * b) : 0.5 * (a + b); };

    double scale = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double m = midpoint(pts[i], pts[i + 1]);
        if (const RealFn* f = segment_fn(m)) {
            scale = std::max({scale, std::abs((*f)(pts[i])), std::abs((*f)(m)), std::abs((*f)(pts[i + 1]))});
        }
    }
    for (const auto& a : mu.atoms()) scale = std::max(scale, std::abs(a.weight));
    const double tol = 1e-13 * scale;

    std::vector<SignedPiece> pieces;
    auto emit = [&pieces](double lo, double hi, Sign s) { pieces.push_back({lo, hi, s}); };
    auto sub = [&](const RealFn& f, double u, double v, double fu, double fv) {
        const Sign su = sign_of(fu, tol), sv = sign_of(fv, tol);
        if (su == sv || sv == Sign::Zero) emit(u, v, su == Sign::Zero ? sv : su);
        else if (su == Sign::Zero) emit(u, v, sv);
        else {
            const double t = bisect_switch(u, v, [&](double x) { return su == Sign::Positive ? f(x) > 0 : f(x) < 0; }, opts.rel_tol);
            emit(u, t, su);
            emit(t, v, sv);
        }
    };
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double a = pts[i], b = pts[i + 1], m = midpoint(a, b);
        const RealFn* f = segment_fn(m);
        if (!f) {
            emit(a, b, Sign::Zero);
            continue;
        }
        const double fa = (*f)(a), fm = (*f)(m), fb = (*f)(b);
        sub(*f, a, m, fa, fm);
        sub(*f, m, b, fm, fb);
    }

    SignPattern out;
    for (const auto& p : pieces) {
        if (!out.sign_intervals.empty() && out.sign_intervals.back().sign == p.sign) {
            out.sign_intervals.back().hi = p.hi;
        } else {
            out.sign_intervals.push_back({p.lo, p.hi, p.sign});
        }
    }
    if (!out.sign_intervals.empty()) {
        out.sign_intervals.front().lo = dom.lo;
        out.sign_intervals.back().hi = dom.hi;
    }
    for (const auto& a : mu.atoms()) {
        const Sign s = sign_of(a.weight, tol);
        if (s != Sign::Zero) out.atom_signs.push_back({a.location, s, a.weight});
    }

    // ordered nonzero elements, atoms placed at the start of the piece they begin
    struct Run {
        Sign sign;
        double lo, hi;
    };
    std::vector<Run> runs;
    auto push = [&runs](Sign s, double lo, double hi) {
        if (s == Sign::Zero) return;
        if (!runs.empty() && runs.back().sign == s) runs.back().hi = hi;
        else runs.push_back({s, lo, hi});
    };
    std::size_t ai = 0;
    const auto& atoms = out.atom_signs;
    for (const auto& p : pieces) {
        while (ai < atoms.size() && atoms[ai].location <= p.lo) {
            push(atoms[ai].sign, atoms[ai].location, atoms[ai].location);
            ++ai;
        }
        push(p.sign, p.lo, p.hi);
    }
    for (; ai < atoms.size(); ++ai) push(atoms[ai].sign, atoms[ai].location, atoms[ai].location);
    if (!runs.empty()) {
        if (runs.front().lo == pts.front()) runs.front().lo = dom.lo;
        if (runs.back().hi == pts.back()) runs.back().hi = dom.hi;
    }

    for (const auto& r : runs) out.shape.push_back(to_char(r.sign));
    if (runs.size() > 3) {
        std::ostringstream os;
        os << "sign pattern " << out.shape << " of L g has more than two sign changes; changes at";
        for (std::size_t i = 1; i < runs.size(); ++i) os << ' ' << fmt(runs[i].lo);
        throw StoppingError(ErrorCode::MoreThanTwoSignChanges, os.str());
    }
    if (runs.size() == 2) {
        if (out.shape == "+-") out.x_r = runs[1].lo;
        else out.x_l = runs[1].lo;
    } else if (runs.size() == 3) {
        out.x_l = runs[1].lo;
        out.x_r = runs[1].hi;
    }
    return out;
}

namespace {

// Locations where a slope-sign function passes from positive to
// non-positive. left(x)/right(x) are the values just left/right of x; they
// differ only at atoms.
/// |mu|: absolute densities and atom weights.
SignedMeasure variation_of(const SignedMeasure& mu) {
    std::vector<DensitySegment> segs;
    for (const auto& sg : mu.segments()) {
        const RealFn d = sg.density;
        segs.push_back({sg.lo, sg.hi, [d](double x) { return std::abs(d(x)); }});
    }
    std::vector<Atom> atoms;
    for (const auto& a : mu.atoms()) atoms.push_back({a.location, std::abs(a.weight)});
    return SignedMeasure(mu.domain(), std::move(segs), std::move(atoms));
}

std::vector<double> maximal_crossings(const std::vector<double>& nodes, const RealFn& left, const RealFn& right,
                                      const RealFn& local_scale, const std::vector<double>& atom_nodes,
                                      double rel_tol) {
    // Zero band relative to the weighted variation accumulated so far, so
    // exponentially growing weights do not swamp the region of interest.
    struct Sample {
        double x, v, tol;
    };
    std::vector<Sample> samples;
    for (double x : nodes) {
        const double tol = 1e-12 * local_scale(x);
        const bool atom = std::binary_search(atom_nodes.begin(), atom_nodes.end(), x);
        if (atom) samples.push_back({x, left(x), tol});
        samples.push_back({x, right(x), tol});
    }

    std::vector<double> out;
    Sign last = Sign::Zero;
    std::size_t zero_start = 0;
    bool in_zero = false;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sign s = sign_of(samples[i].v, samples[i].tol);
        if (s == Sign::Zero) {
            if (last == Sign::Positive && !in_zero) {
                in_zero = true;
                zero_start = i;
            }
            continue;
        }
        if (s == Sign::Negative && last == Sign::Positive) {
            const std::size_t j = in_zero ? zero_start : i;
            const double a = samples[j - 1].x, b = samples[j].x;
            if (a == b) {
                out.push_back(a);
            } else {
                out.push_back(bisect_switch(a, b, [&](double x) { return right(x) > 0; }, rel_tol));
            }
        }
        last = s;
        in_zero = false;
    }
    return out;
}

std::vector<double> probe_toward(double anchor, double end, const Interval& support, int levels) {
    std::vector<double> out;
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
    return out;
}

std::optional<TurningPoint> pick_global(const std::vector<double>& cands, const PayoffDC& g, const RealFn& base,
                                        const ScanOptions& opts) {
    if (cands.empty()) return std::nullopt;
    double best_x = cands.front(), best = g(best_x) / base(best_x);
    for (double c : cands) {
        const double r = g(c) / base(c);
        if (r > best) {
            best = r;
            best_x = c;
        }
    }
    bool global = true;
    for (double x : scan_grid(opts.window, opts.points, g.breakpoints())) {
        if (g(x) / base(x) > best + 1e-9 * std::abs(best)) {
            global = false;
            break;
        }
    }
    return TurningPoint{best_x, best, global};
}

// Staircase payoffs: local maxima of g/f are upward jump points with a
// non-positive right slope and interior stationary points of each piece.
std::vector<double> staircase_candidates(const PayoffDC& g, const RealFn& f, const RealFn& df,
                                         const ScanOptions& opts) {
    auto q_right = [&](double x) { return g.d_right(x) * f(x) - g(x) * df(x); };
    std::vector<double> out;
    const auto br = g.breakpoints();
    for (std::size_t i = 0; i < br.size(); ++i) {
        const double y = br[i];
        if (!opts.window.contains(y)) continue;
        const double q_left = g.d_left(y) * f(y) - g.left_limit(y) * df(y);
        const bool up = g.value_jump(i) > 0;
        if (q_right(y) <= 0 && (up || q_left >= 0)) out.push_back(y);
    }
    const auto grid = scan_grid(opts.window, opts.points, br);
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double a = grid[k], b = grid[k + 1];
        if (g.piece_index(a) != g.piece_index(b) && std::find(br.begin(), br.end(), b) == br.end()) continue;
        // stay inside one piece: evaluate the right end from the left piece
        const Piece& p = g.pieces()[g.piece_index(a)];
        auto q = [&](double x) { return p.d1(x) * f(x) - p.f(x) * df(x); };
        if (q(a) > 0 && q(b) < 0) out.push_back(bisect_switch(a, b, [&](double x) { return q(x) > 0; }, opts.rel_tol));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<TurningPoint> turning_point(bool use_psi, const PayoffDC& g, const SignedMeasure& mu,
                                          const FundamentalPair& pair, const ScanOptions& opts,
                                          std::vector<double>* candidates) {
    const RealFn base = use_psi ? RealFn([&pair](double x) { return pair.psi(x); })
                                : RealFn([&pair](double x) { return pair.phi(x); });
    std::vector<double> cands;
    if (g.has_value_jumps()) {
        const RealFn dbase = use_psi ? RealFn([&pair](double x) { return pair.dpsi(x); })
                                     : RealFn([&pair](double x) { return pair.dphi(x); });
        cands = staircase_candidates(g, base, dbase, opts);
        if (candidates) *candidates = cands;
        return pick_global(cands, g, base, opts);
    }
    std::vector<double> atoms;
    for (const auto& a : mu.atoms()) atoms.push_back(a.location);
    const auto nodes = scan_grid(opts.window, opts.points, mu.breakpoints());
    const auto var = variation_of(mu);
    if (use_psi) {
        const RealFn w = [&pair](double x) { return pair.cap_psi(x); };
        const CumulativeIntegral F(mu, w, CumulativeIntegral::Anchor::Left, nodes, pair.support());
        const CumulativeIntegral V(var, w, CumulativeIntegral::Anchor::Left, nodes, pair.support());
        cands = maximal_crossings(nodes, [&F](double x) { return F.open(x); }, [&F](double x) { return F.closed(x); },
                                  [&V](double x) { return V.closed(x); }, atoms, opts.rel_tol);
    } else {
        // slope of g/phi has the sign of minus the right-tail integral
        const RealFn w = [&pair](double x) { return pair.cap_phi(x); };
        const CumulativeIntegral G(mu, w, CumulativeIntegral::Anchor::Right, nodes, pair.support());
        const CumulativeIntegral V(var, w, CumulativeIntegral::Anchor::Right, nodes, pair.support());
        cands = maximal_crossings(nodes, [&G](double x) { return -G.closed(x); }, [&G](double x) { return -G.open(x); },
                                  [&V](double x) { return V.closed(x); }, atoms, opts.rel_tol);
    }
    if (candidates) *candidates = cands;
    if (cands.size() > 1) {
        std::ostringstream os;
        os << "g/" << (use_psi ? "psi" : "phi") << " has " << cands.size() << " maximal turning points:";
        for (double c : cands) os << ' ' << fmt(c);
        throw StoppingError(ErrorCode::MultipleCrossings, os.str());
    }
    return pick_global(cands, g, base, opts);
}

}  // namespace

std::optional<TurningPoint> turning_point_psi(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                                              const ScanOptions& opts, std::vector<double>* candidates) {
    return turning_point(true, g, mu, pair, opts, candidates);
}

std::optional<TurningPoint> turning_point_phi(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                                              const ScanOptions& opts, std::vector<double>* candidates) {
    return turning_point(false, g, mu, pair, opts, candidates);
}

TurningPoints turning_points(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                             const ScanOptions& opts) {
    TurningPoints tp;
    tp.psi = turning_point_psi(g, mu, pair, opts, &tp.psi_candidates);
    tp.phi = turning_point_phi(g, mu, pair, opts, &tp.phi_candidates);
    return tp;
}

Classification classify(const SignPattern& pattern, const TurningPoints& tp, const PayoffDC& g,
                        const FundamentalPair& pair) {
    const auto& spec = pair.diffusion();
    const double anchor = spec.window.midpoint();
    const auto left_probes = probe_toward(anchor, spec.interval.lo, pair.support(), 30);
    const auto right_probes = probe_toward(anchor, spec.interval.hi, pair.support(), 30);
    Classification c{CaseLabel::II, false, "", 0, 0};
    c.limit_psi_alpha = left_probes.empty() ? 0 : g(left_probes.back()) / pair.psi(left_probes.back());
    c.limit_phi_beta = right_probes.empty() ? 0 : g(right_probes.back()) / pair.phi(right_probes.back());

    auto unclassifiable = [&](const std::string& why) {
        throw StoppingError(ErrorCode::Unclassifiable, "pattern '" + pattern.shape + "': " + why);
    };
    const std::string& s = pattern.shape;
    if (s.empty()) {
        c.label = CaseLabel::II;
        c.evidence = "L g vanishes identically, so v = g = 0";
    } else if (s == "+") {
        c.label = CaseLabel::I;
        c.evidence = "L g is a positive measure";
    } else if (s == "-") {
        c.label = CaseLabel::II;
        c.evidence = "-L g is a positive measure";
    } else if (s == "+-") {
        if (!tp.psi) unclassifiable("no maximal turning point of g/psi");
        c.label = CaseLabel::III;
        c.evidence = "L g positive then negative from x_r = " + fmt(*pattern.x_r) + "; x_psi = " + fmt(tp.psi->location);
    } else if (s == "-+") {
        if (!tp.phi) unclassifiable("no maximal turning point of g/phi");
        c.label = CaseLabel::IV;
        c.evidence = "L g negative then positive from x_l = " + fmt(*pattern.x_l) + "; x_phi = " + fmt(tp.phi->location);
    } else if (s == "+-+") {
        if (!tp.psi || !tp.phi) unclassifiable("Case V needs maximal turning points of both g/psi and g/phi");
        c.label = CaseLabel::V;
        c.evidence = "L g negative on [" + fmt(*pattern.x_l) + ", " + fmt(*pattern.x_r) + "]; x_psi = " +
                     fmt(tp.psi->location) + " <= x_phi = " + fmt(tp.phi->location) + " required";
    } else if (s == "-+-") {
        c.label = CaseLabel::VI;
        const bool cross_psi = tp.psi && c.limit_psi_alpha >= tp.psi->ratio;
        const bool cross_phi = tp.phi && c.limit_phi_beta >= tp.phi->ratio;
        std::ostringstream ev;
        ev << "L g positive on [" << fmt(*pattern.x_l) << ", " << fmt(*pattern.x_r) << "], negative outside";
        if (tp.psi) ev << "; x_psi = " << fmt(tp.psi->location);
        if (tp.phi) ev << "; x_phi = " << fmt(tp.phi->location);
        ev << "; lim g/psi at alpha ~ " << fmt(c.limit_psi_alpha) << ", lim g/phi at beta ~ "
           << fmt(c.limit_phi_beta);
        if (tp.psi && !cross_psi) unclassifiable(ev.str() + "; existence condition fails on the psi side");
        if (tp.phi && !cross_phi) unclassifiable(ev.str() + "; existence condition fails on the phi side");
        if (tp.psi && tp.phi && tp.phi->location <= tp.psi->location) {
            ev << "; both stationary points present with x_phi <= x_psi";
        } else {
            c.inferred = true;
            ev << "; stationary point(s) missing, inferred from the limit behaviour and checked by the crossing "
                  "system";
        }
        c.evidence = ev.str();
    } else {
        unclassifiable("shape outside the six cases");
    }
    return c;
}

}  // namespace dcstop
