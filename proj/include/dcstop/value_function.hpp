#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcstop/boundary_solver.hpp"

namespace dcstop {

/// v = A phi + B psi on continuation components, g elsewhere. Constructing
/// directly skips the continuity check; use assemble() for solved problems.
class ValueFunction {
public:
    ValueFunction(RegionPartition partition, PayoffDC g, FundamentalPair pair);

    double operator()(double x) const;
    double d_left(double x) const;
    double d_right(double x) const;
    bool in_continuation(double x) const { return partition_.component(x) != nullptr; }

    const RegionPartition& partition() const noexcept { return partition_; }
    const PayoffDC& payoff() const noexcept { return g_; }
    const FundamentalPair& pair() const noexcept { return pair_; }

private:
    RegionPartition partition_;
    PayoffDC g_;
    FundamentalPair pair_;
};

/// Throws ContinuityViolation when a component misses g at a finite end by
/// more than 1e-10 relative.
ValueFunction assemble(const Solution& solution, const PayoffDC& g, const FundamentalPair& pair);

struct CheckResult {
    std::string name;
    bool pass = true;
    double worst = 0;    ///< largest scaled excess over the tolerance (> 0 fails)
    double worst_x = 0;
    std::string detail;
};

struct VerificationReport {
    std::vector<CheckResult> checks;  ///< HJB1, HJB2, HJB3, w-domin, ode-residual
    double growth_constant = 0;       ///< minimal sampled C in |v| <= C (1 + |g|)
    bool ok() const;
};

/// Log-uniform (or uniform) points over the window plus breakpoints and
/// boundaries, each boundary flanked by close neighbours.
std::vector<double> verification_grid(const ValueFunction& v, int n = 1000);

VerificationReport verify_solution(const ValueFunction& v, std::span<const double> grid, double tol = 1e-8);

struct SmoothFitGap {
    double x;
    double left_gap;   ///< v'_- - g'_-
    double right_gap;  ///< g'_+ - v'_+
    bool value_jump;   ///< g jumps at x: continuous fit only, left gap waived
    bool smooth;       ///< both one-sided derivatives of v and g agree
    bool holds;        ///< one-sided inequalities and v'_+ <= v'_-
};

std::vector<SmoothFitGap> smooth_fit_report(const ValueFunction& v, double tol = 1e-6);

}  // namespace dcstop
