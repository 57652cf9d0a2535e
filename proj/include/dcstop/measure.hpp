#pragma once

#include <span>
#include <vector>

#include "dcstop/diffusion.hpp"
#include "dcstop/quadrature.hpp"

namespace dcstop {

struct Atom {
    double location;
    double weight;
};

/// Density on ]lo, hi[ with respect to Lebesgue measure.
struct DensitySegment {
    double lo;
    double hi;
    RealFn density;
};

/// Signed measure on ]alpha, beta[: absolutely continuous part given piecewise
/// plus finitely many atoms.
class SignedMeasure {
public:
    SignedMeasure() = default;
    SignedMeasure(Interval domain, std::vector<DensitySegment> segments, std::vector<Atom> atoms);

    const Interval& domain() const noexcept { return domain_; }
    std::span<const DensitySegment> segments() const noexcept { return segments_; }
    std::span<const Atom> atoms() const noexcept { return atoms_; }
    /// Density at x (0 outside every segment, right-continuous at segment ends).
    double density(double x) const;
    /// Weight of the atom at x, 0 if none.
    double atom_at(double x) const;
    /// Segment ends and atom locations, sorted and unique.
    std::vector<double> breakpoints() const;

private:
    Interval domain_;
    std::vector<DensitySegment> segments_;
    std::vector<Atom> atoms_;
};

enum class End { Open, Closed };

/// Integral of weight d(mu) over the interval from lo to hi with the given end
/// conventions. Infinite ends are always open.
/// Ends are clamped to `support` (where the weight can be evaluated).
double integrate_measure(const SignedMeasure& mu, const RealFn& weight, double lo, End lo_end, double hi,
                         End hi_end, Interval support = {}, const QuadratureOptions& opts = {});
/// Same against the total variation |mu|.
double integrate_variation(const SignedMeasure& mu, const RealFn& weight, double lo, double hi,
                           Interval support = {}, const QuadratureOptions& opts = {});

/// Tabulated cumulative integral of weight d(mu), anchored at alpha (Left) or
/// beta (Right). Left: x -> int_{]alpha, x]} (closed) or int_{]alpha, x[} (open).
/// Right: x -> int_{[x, beta[} (closed) or int_{]x, beta[} (open).
/// Evaluation between nodes adds one partial panel by quadrature.
class CumulativeIntegral {
public:
    enum class Anchor { Left, Right };

    CumulativeIntegral(const SignedMeasure& mu, RealFn weight, Anchor anchor, std::vector<double> nodes,
                       Interval support, const QuadratureOptions& opts = {});

    double closed(double x) const;
    double open(double x) const;
    std::span<const double> nodes() const noexcept { return nodes_; }
    Anchor anchor() const noexcept { return anchor_; }
    const SignedMeasure& measure() const noexcept { return mu_; }
    const RealFn& weight() const noexcept { return weight_; }

private:
    double density_integral(double a, double b) const;
    double value(double x, bool closed_end) const;

    SignedMeasure mu_;
    RealFn weight_;
    Anchor anchor_;
    Interval support_;
    QuadratureOptions opts_;
    std::vector<double> nodes_;
    // Left: cum_[k] = int over ]alpha, nodes_[k][ ; Right: int over ]nodes_[k], beta[
    std::vector<double> cum_;
    std::vector<double> atom_;  // weighted atom mass at each node
};

/// Log-uniform (or uniform) grid of n points over the window, merged with the
/// extra points that fall inside it.
std::vector<double> scan_grid(const Interval& window, int n, std::span<const double> extra = {});

}  // namespace dcstop
