#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dcstop/classifier.hpp"
#include "dcstop/measure.hpp"
#include "dcstop/payoff.hpp"
#include "dcstop/regions.hpp"

namespace dcstop {

/// Interval integrals of kappa*Phi and kappa*Psi against L g. Phi is tabulated
/// from the right end and Psi from the left, the directions in which each is
/// integrable.
class QFunctionals {
public:
    QFunctionals(const SignedMeasure& mu, const FundamentalPair& pair, int nodes = 4096);

    double q_phi_open(double y, double z) const;    ///< over ]y, z[
    double q_phi_closed(double y, double z) const;  ///< over [y, z]
    double q_psi_open(double y, double z) const;
    double q_psi_closed(double y, double z) const;

    /// kappa * int_{[x, beta[} Phi dmu (closed) and over ]x, beta[ (open)
    double phi_tail(double x, End end) const;
    /// kappa * int_{]alpha, x]} Psi dmu (closed) and over ]alpha, x[ (open)
    double psi_head(double x, End end) const;

    const FundamentalPair& pair() const noexcept { return *pair_; }
    const SignedMeasure& measure() const noexcept { return phi_.measure(); }

private:
    const FundamentalPair* pair_;
    CumulativeIntegral phi_;
    CumulativeIntegral psi_;
};

enum class LStatus { Root, AtomStraddle, AtTruncation, NoRoot };

/// l(u): the z >= z_min where the q-functional started at u changes sign.
/// AtomStraddle: the sign change happens across the atom at z_min, returned
/// as z. AtTruncation: no sign change before beta; z = beta.
struct LValue {
    double z;
    LStatus status;
};

LValue l_phi_map(double u, const QFunctionals& q, double z_min);
LValue l_psi_map(double u, const QFunctionals& q, double z_min);

struct BoundaryPair {
    double a;
    double b;
    double A;
    double B;
    bool smooth_a = true;
    bool smooth_b = true;
};

struct CaseVIDiagnostics {
    double q_phi_open = 0, q_phi_closed = 0, q_psi_open = 0, q_psi_closed = 0;
    double A_integral = 0;  ///< -kappa int_{]alpha,a]} Psi dmu
    double B_integral = 0;  ///< -kappa int_{[a,beta[} Phi dmu
    double slope_ratio = 0;          ///< phi(a) psi(b) / (phi(b) psi(a))
    double slope_ratio_numeric = 0;  ///< finite-difference l_phi'(a) / l_psi'(a)
    std::vector<std::pair<double, double>> delta_samples;  ///< (u, l_phi(u) - l_psi(u))
};

/// Boundary point with the side the continuation region lies on.
struct BoundaryFit {
    double x;
    bool smooth;  ///< v' matches g' from the continuation side
};

struct Solution {
    CaseLabel label = CaseLabel::II;
    bool inferred = false;
    std::string evidence;
    RegionPartition partition;
    std::vector<BoundaryFit> boundaries;
    std::optional<BoundaryPair> pair;
    std::optional<CaseVIDiagnostics> vi;
};

/// A, B with A phi + B psi = gy at y and gz at z. Throws SingularFitSystem.
std::pair<double, double> fit_two_points(const FundamentalPair& pair, double y, double gy, double z, double gz);

Solution solve_case_I(const FundamentalPair& pair);
Solution solve_case_II(const FundamentalPair& pair);
/// Throws NonpositiveB.
Solution solve_case_III(const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair);
/// Throws NonpositiveA.
Solution solve_case_IV(const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair);
/// Throws OrderViolation when x_psi > x_phi.
Solution solve_case_V(const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair);
/// Two boundaries from the crossing of l_phi and l_psi. Throws NoCrossing,
/// MultipleCrossings, AtomStraddle (atom of L g outside [x_l, x_r]) and
/// NegativeCoefficient.
Solution solve_case_VI(const QFunctionals& q, const SignPattern& pattern, const TurningPoints& tp, const PayoffDC& g,
                       bool inferred);
/// Smallest concave majorant of g/phi in the coordinate psi/phi; handles
/// payoffs with jumps. Contacts on smooth pieces are refined by smooth fit.
Solution paste_intervals(const PayoffDC& g, const FundamentalPair& pair, int points = 4096);

/// Case label implied by a partition's shape.
CaseLabel label_from_partition(const RegionPartition& p);

}  // namespace dcstop
