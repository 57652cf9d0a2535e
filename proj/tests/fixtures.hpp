#pragma once

// Shared payoffs and diffusions for the unit and acceptance tests.

#include <cmath>
#include <vector>

#include "dcstop/diffusion.hpp"
#include "dcstop/payoff.hpp"

namespace fixtures {

using namespace dcstop;

inline DiffusionSpec reference_gbm() { return geometric_bm(0.0, 0.2, 0.01); }

inline const double kM = 0.5 - std::sqrt(0.75);
inline const double kN = 0.5 + std::sqrt(0.75);

/// c below 2, x + c - 2 above: kinked linear payoff with an atom at 2.
inline PayoffDC kinked_linear(double c) {
    return PayoffDC({2.0}, {constant_piece(c), polynomial({c - 2.0, 1.0})});
}

inline PayoffDC staircase(const std::vector<double>& levels) {
    std::vector<Piece> pieces{constant_piece(0.0)};
    std::vector<double> br;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        br.push_back(2.0 * static_cast<double>(i + 1));
        pieces.push_back(constant_piece(levels[i]));
    }
    return PayoffDC(br, pieces, true);
}

inline PayoffDC staircase_g1() { return staircase({1, 4, 9, 16, 25}); }
inline PayoffDC staircase_g2() { return staircase({2, 4, 6, 8, 10}); }

/// (K - x)^+
inline PayoffDC put(double k) { return PayoffDC({k}, {polynomial({k, -1.0}), constant_piece(0.0)}); }

/// min(x - 1, 1, 5 - x)^+, a trapezoid with kinks at 1, 2, 4, 5
inline PayoffDC trapezoid() {
    return PayoffDC({1, 2, 4, 5}, {constant_piece(0), polynomial({-1, 1}), constant_piece(1), polynomial({5, -1}),
                                   constant_piece(0)});
}

}  // namespace fixtures
