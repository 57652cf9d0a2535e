#include "dcstop/measure.hpp"

#include <algorithm>
#include <cmath>

#include "dcstop/interp.hpp"

namespace dcstop {

SignedMeasure::SignedMeasure(Interval domain, std::vector<DensitySegment> segments, std::vector<Atom> atoms)
    : domain_(domain), segments_(std::move(segments)), atoms_(std::move(atoms)) {
    std::sort(segments_.begin(), segments_.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    std::erase_if(atoms_, [](const Atom& a) { return a.weight == 0.0; });
    std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
    for (const auto& s : segments_) {
        if (!(s.lo < s.hi)) throw StoppingError(ErrorCode::InvalidArgument, "empty density segment");
    }
    for (std::size_t i = 1; i < segments_.size(); ++i) {
        if (segments_[i].lo < segments_[i - 1].hi) {
            throw StoppingError(ErrorCode::InvalidArgument, "overlapping density segments");
        }
    }
}

double SignedMeasure::density(double x) const {
    for (const auto& s : segments_) {
        if (x >= s.lo && x < s.hi) return s.density(x);
    }
    return 0.0;
}

double SignedMeasure::atom_at(double x) const {
    for (const auto& a : atoms_) {
        if (a.location == x) return a.weight;
    }
    return 0.0;
}

std::vector<double> SignedMeasure::breakpoints() const {
    std::vector<double> out;
    for (const auto& s : segments_) {
        if (std::isfinite(s.lo)) out.push_back(s.lo);
        if (std::isfinite(s.hi)) out.push_back(s.hi);
    }
    for (const auto& a : atoms_) out.push_back(a.location);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

double clamp_lo(double lo, const Interval& a, const Interval& b) { return std::max({lo, a.lo, b.lo}); }
double clamp_hi(double hi, const Interval& a, const Interval& b) { return std::min({hi, a.hi, b.hi}); }

// Integral of weight * f over ]lo, hi[ for each density segment, where f maps
// the density value (identity or absolute value).
template <class F>
double density_part(const SignedMeasure& mu, const RealFn& weight, double lo, double hi, F transform,
                    const QuadratureOptions& opts) {
    double total = 0.0;
    const Interval& dom = mu.domain();
    for (const auto& s : mu.segments()) {
        const double a = std::max(lo, s.lo), b = std::min(hi, s.hi);
        if (!(b > a)) continue;
        const RealFn f = [&](double x) {
            const double w = weight(x);
            if (w == 0.0) return 0.0;
            return w * transform(s.density(x));
        };
        total += integrate_function(f, a, b, a == dom.lo, b == dom.hi, opts);
    }
    return total;
}

}  // namespace

double integrate_measure(const SignedMeasure& mu, const RealFn& weight, double lo, End lo_end, double hi,
                         End hi_end, Interval support, const QuadratureOptions& opts) {
    const double a = clamp_lo(lo, mu.domain(), support), b = clamp_hi(hi, mu.domain(), support);
    if (a > b) return 0.0;
    double total = a < b ? density_part(mu, weight, a, b, [](double d) { return d; }, opts) : 0.0;
    for (const auto& atom : mu.atoms()) {
        const double y = atom.location;
        const bool after_lo = y > lo || (y == lo && lo_end == End::Closed);
        const bool before_hi = y < hi || (y == hi && hi_end == End::Closed);
        const bool in_support = y > support.lo && y < support.hi;
        if (after_lo && before_hi && in_support) total += weight(y) * atom.weight;
    }
    return total;
}

double integrate_variation(const SignedMeasure& mu, const RealFn& weight, double lo, double hi, Interval support,
                           const QuadratureOptions& opts) {
    const double a = clamp_lo(lo, mu.domain(), support), b = clamp_hi(hi, mu.domain(), support);
    if (!(a < b)) return 0.0;
    double total = density_part(mu, weight, a, b, [](double d) { return std::abs(d); }, opts);
    for (const auto& atom : mu.atoms()) {
        if (atom.location >= a && atom.location <= b) total += std::abs(weight(atom.location) * atom.weight);
    }
    return total;
}

std::vector<double> scan_grid(const Interval& window, int n, std::span<const double> extra) {
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(n) + extra.size());
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        xs.push_back(window.log_scaled() ? window.lo * std::pow(window.hi / window.lo, t)
                                         : window.lo + t * (window.hi - window.lo));
    }
    xs.front() = window.lo;
    xs.back() = window.hi;
    for (double e : extra) {
        if (e > window.lo && e < window.hi) xs.push_back(e);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

CumulativeIntegral::CumulativeIntegral(const SignedMeasure& mu, RealFn weight, Anchor anchor,
                                       std::vector<double> nodes, Interval support, const QuadratureOptions& opts)
    : mu_(mu), weight_(std::move(weight)), anchor_(anchor), opts_(opts) {
    support_ = {std::max(support.lo, mu.domain().lo), std::min(support.hi, mu.domain().hi)};
    for (double b : mu_.breakpoints()) nodes.push_back(b);
    std::erase_if(nodes, [this](double x) { return !(x > support_.lo && x < support_.hi) || !std::isfinite(x); });
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    if (nodes.size() < 2) throw StoppingError(ErrorCode::InvalidArgument, "cumulative table needs two nodes");
    nodes_ = std::move(nodes);

    const std::size_t n = nodes_.size();
    atom_.assign(n, 0.0);
    for (const auto& a : mu_.atoms()) {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), a.location);
        if (it != nodes_.end() && *it == a.location) {
            atom_[static_cast<std::size_t>(it - nodes_.begin())] = weight_(a.location) * a.weight;
        }
    }
    std::vector<double> panel(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) panel[k] = density_integral(nodes_[k], nodes_[k + 1]);

    cum_.assign(n, 0.0);
    if (anchor_ == Anchor::Left) {
        cum_[0] = density_integral(support_.lo, nodes_[0]);
        for (std::size_t k = 0; k + 1 < n; ++k) cum_[k + 1] = cum_[k] + atom_[k] + panel[k];
    } else {
        cum_[n - 1] = density_integral(nodes_[n - 1], support_.hi);
        for (std::size_t k = n - 1; k-- > 0;) cum_[k] = cum_[k + 1] + atom_[k + 1] + panel[k];
    }
}

double CumulativeIntegral::density_integral(double a, double b) const {
    // every atom inside the support is a node, so ]a, b[ between nodes is atom-free
    return integrate_measure(mu_, weight_, a, End::Open, b, End::Open, support_, opts_);
}

double CumulativeIntegral::value(double x, bool closed_end) const {
    const std::size_t n = nodes_.size();
    if (anchor_ == Anchor::Left) {
        if (x < nodes_.front()) {
            return integrate_measure(mu_, weight_, support_.lo, End::Open, x,
                                     closed_end ? End::Closed : End::Open, support_, opts_);
        }
        const std::size_t k = detail::locate_panel(nodes_, x);
        const std::size_t j = (x >= nodes_[n - 1]) ? n - 1 : k;
        if (x == nodes_[j]) return cum_[j] + (closed_end ? atom_[j] : 0.0);
        return cum_[j] + atom_[j] + density_integral(nodes_[j], x);
    }
    if (x > nodes_.back()) {
        return integrate_measure(mu_, weight_, x, closed_end ? End::Closed : End::Open, support_.hi, End::Open,
                                 support_, opts_);
    }
    if (x < nodes_.front()) return cum_[0] + atom_[0] + density_integral(x, nodes_[0]);
    const std::size_t k = detail::locate_panel(nodes_, x);
    const std::size_t j = (x >= nodes_[n - 1]) ? n - 1 : k;
    if (x == nodes_[j]) return cum_[j] + (closed_end ? atom_[j] : 0.0);
    // ]x, beta[ = ]x, n_{j+1}[ + {n_{j+1}} + ]n_{j+1}, beta[
    return cum_[j + 1] + atom_[j + 1] + density_integral(x, nodes_[j + 1]);
}

double CumulativeIntegral::closed(double x) const { return value(x, true); }
double CumulativeIntegral::open(double x) const { return value(x, false); }

}  // namespace dcstop
