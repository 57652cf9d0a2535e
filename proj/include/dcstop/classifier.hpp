#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dcstop/diffusion.hpp"
#include "dcstop/measure.hpp"
#include "dcstop/payoff.hpp"
#include "dcstop/regions.hpp"

namespace dcstop {

enum class Sign { Negative = -1, Zero = 0, Positive = 1 };

char to_char(Sign s);

struct SignInterval {
    double lo;
    double hi;
    Sign sign;
};

struct AtomSign {
    double location;
    Sign sign;
    double weight;
};

/// Sign structure of L g. `shape` lists the nonzero signs of intervals and
/// atoms in order with repeats collapsed, e.g. "-+-".
struct SignPattern {
    std::vector<SignInterval> sign_intervals;
    std::vector<AtomSign> atom_signs;
    std::optional<double> x_l;
    std::optional<double> x_r;
    std::string shape;
};

struct ScanOptions {
    Interval window;
    int points = 2048;
    double rel_tol = 1e-10;
};

/// Scan window taken from the diffusion.
ScanOptions default_scan(const FundamentalPair& pair, int points = 2048);

/// Throws MoreThanTwoSignChanges for shapes outside the six cases.
SignPattern sign_partition(const SignedMeasure& mu, const ScanOptions& opts);

struct TurningPoint {
    double location;
    double ratio;  ///< g/psi (or g/phi) at the point
    bool global;   ///< ratio sweep found nothing larger
};

struct TurningPoints {
    std::optional<TurningPoint> psi;
    std::optional<TurningPoint> phi;
    std::vector<double> psi_candidates;
    std::vector<double> phi_candidates;
};

/// Maximal turning point of g/psi: F(x) = int_{]alpha,x]} Psi dLg crosses zero
/// from above. Payoffs with jumps are handled directly on g/psi (mu unused);
/// the global maximum among the local ones is returned.
std::optional<TurningPoint> turning_point_psi(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                                              const ScanOptions& opts, std::vector<double>* candidates = nullptr);
/// Mirror image with Phi and right tails.
std::optional<TurningPoint> turning_point_phi(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                                              const ScanOptions& opts, std::vector<double>* candidates = nullptr);
TurningPoints turning_points(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                             const ScanOptions& opts);

struct Classification {
    CaseLabel label;
    bool inferred = false;  ///< Case VI without both stationary points
    std::string evidence;
    double limit_psi_alpha = 0;  ///< estimate of lim g/psi at alpha
    double limit_phi_beta = 0;   ///< estimate of lim g/phi at beta
};

/// Throws Unclassifiable when the evidence is inconsistent.
Classification classify(const SignPattern& pattern, const TurningPoints& tp, const PayoffDC& g,
                        const FundamentalPair& pair);

}  // namespace dcstop
