#pragma once

#include <algorithm>
#include <cstddef>
#include <span>

namespace dcstop::detail {

/// Quintic Hermite interpolation on [x0, x1] from value, first and second
/// derivative at both ends. Returns {f, f'} at x.
struct HermiteValue {
    double f;
    double df;
};

inline HermiteValue quintic_hermite(double x0, double x1, double f0, double d0, double s0,
                                    double f1, double d1, double s1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;

    // basis functions and their t-derivatives
    const double h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double h01 = 10 * t3 - 15 * t4 + 6 * t5;
    const double h10 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double h11 = -4 * t3 + 7 * t4 - 3 * t5;
    const double h20 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    const double h21 = 0.5 * (t3 - 2 * t4 + t5);

    const double g00 = -30 * t2 + 60 * t3 - 30 * t4;
    const double g10 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
    const double g11 = -12 * t2 + 28 * t3 - 15 * t4;
    const double g20 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4);
    const double g21 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4);

    const double f = h00 * f0 + h01 * f1 + h * (h10 * d0 + h11 * d1) + h * h * (h20 * s0 + h21 * s1);
    const double df = (g00 * f0 - g00 * f1) / h + (g10 * d0 + g11 * d1) + h * (g20 * s0 + g21 * s1);
    return {f, df};
}

/// Index k of the panel [nodes[k], nodes[k+1]] containing x (clamped to the table).
inline std::size_t locate_panel(std::span<const double> nodes, double x) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    if (it == nodes.begin()) return 0;
    std::size_t k = static_cast<std::size_t>(it - nodes.begin()) - 1;
    return std::min(k, nodes.size() - 2);
}

}  // namespace dcstop::detail
