#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcstop/diffusion.hpp"
#include "dcstop/measure.hpp"

namespace dcstop {

/// Smooth function on one piece with its first two derivatives.
struct Piece {
    RealFn f;
    RealFn d1;
    RealFn d2;
};

/// sum_k c_k x^k
Piece polynomial(std::vector<double> coeffs);
/// c x^p (x > 0)
Piece power_term(double coeff, double exponent);
/// c e^{k x}
Piece exp_term(double coeff, double rate);
Piece constant_piece(double c);
Piece operator+(const Piece& a, const Piece& b);
Piece scaled(const Piece& p, double s);

/// Piecewise-smooth payoff: pieces[0] on ]alpha, y_1[, pieces[i] on [y_i, y_{i+1}[.
/// Right-continuous at breakpoints. Value jumps require staircase mode.
class PayoffDC {
public:
    PayoffDC(std::vector<double> breakpoints, std::vector<Piece> pieces, bool staircase = false);
    explicit PayoffDC(Piece single) : PayoffDC({}, {std::move(single)}) {}

    double operator()(double x) const;
    /// Left limit g(x-).
    double left_limit(double x) const;
    double d_left(double x) const;
    double d_right(double x) const;
    /// Second derivative of the piece containing x (absolutely continuous part).
    double d2(double x) const;

    std::span<const double> breakpoints() const noexcept { return breaks_; }
    std::span<const Piece> pieces() const noexcept { return pieces_; }
    std::size_t piece_index(double x) const;
    bool staircase() const noexcept { return staircase_; }
    /// g(y_i) - g(y_i-)
    double value_jump(std::size_t i) const;
    /// g'_+(y_i) - g'_-(y_i)
    double kink_jump(std::size_t i) const;
    bool has_value_jumps(double tol = 1e-12) const;

private:
    std::vector<double> breaks_;
    std::vector<Piece> pieces_;
    bool staircase_;
};

/// Density 1/2 sigma^2 g'' + b g' - r g on each piece plus atoms
/// 1/2 sigma^2 (g'_+ - g'_-) at the kinks.
SignedMeasure lop_measure(const PayoffDC& g, const DiffusionSpec& spec);

struct TailDiagnostic {
    bool converged = false;
    bool diverged = false;
    bool truncated = false;  ///< probes stopped at the tabulated support
    double value = 0;        ///< accumulated (or extrapolated) tail mass
    std::string detail;
};

struct IntegrabilityReport {
    bool integrable = false;
    TailDiagnostic left;   ///< int Psi d|mu| toward alpha
    TailDiagnostic right;  ///< int Phi d|mu| toward beta
};

IntegrabilityReport check_integrability(const SignedMeasure& mu, const FundamentalPair& pair);

struct GrowthReport {
    bool limits_hold = false;
    bool left = false;   ///< |g|/phi -> 0 at alpha
    bool right = false;  ///< |g|/psi -> 0 at beta
    std::string detail;
};

GrowthReport check_growth_limits(const PayoffDC& g, const FundamentalPair& pair);

struct RepresentationReport {
    double max_error = 0;  ///< max |rep - g| / (1 + |g|)
    double worst_x = 0;
    std::vector<double> reconstructed;
};

/// g(x) = -kappa (phi(x) int_{]alpha,x[} Psi dmu + psi(x) int_{[x,beta[} Phi dmu)
RepresentationReport representation_check(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair,
                                          std::span<const double> grid);

struct SlopeIdentity {
    std::string name;
    double lhs;
    double rhs;
};

struct SlopeBrackets {
    double x;
    std::vector<SlopeIdentity> identities;  ///< the four one-sided slope identities
    double max_mismatch = 0;
};

/// Evaluates both sides of the one-sided slope identities at x and throws
/// IdentityMismatch when they disagree by more than tol (relative).
SlopeBrackets slope_functionals(const PayoffDC& g, const SignedMeasure& mu, const FundamentalPair& pair, double x,
                                double tol = 1e-6);

/// Terminal-equivalent payoff g = -G + h for a running reward H, where h solves
/// (L - r) h = -H. h is tabulated on `nodes` points of the window.
PayoffDC running_payoff_to_terminal(const PayoffDC& running, const PayoffDC& terminal, const FundamentalPair& pair,
                                    int nodes = 2049);

}  // namespace dcstop
