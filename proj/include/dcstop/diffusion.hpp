#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcstop/errors.hpp"

namespace dcstop {

using RealFn = std::function<double(double)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Open interval ]lo, hi[ with possibly infinite ends.
struct Interval {
    double lo = -kInf;
    double hi = kInf;

    bool contains(double x) const { return x > lo && x < hi; }
    bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
    /// Log spacing is used for positive windows spanning more than a decade.
    bool log_scaled() const { return lo > 0 && hi / lo > 10.0; }
    double midpoint() const { return log_scaled() ? std::sqrt(lo * hi) : 0.5 * (lo + hi); }
};

enum class Preset { BrownianMotion, GeometricBrownianMotion, OrnsteinUhlenbeck, Cir, Custom };

std::string to_string(Preset preset);

/// Constant parameters of a preset family. Unused fields stay zero.
struct PresetParams {
    double drift = 0;       ///< mu for BM, b for GBM (b(x) = drift * x)
    double volatility = 0;  ///< sigma (GBM: sigma(x) = volatility * x)
    double rate = 0;        ///< constant discount rate
    double mean_reversion = 0;
    double long_run_mean = 0;
};

/// Coefficients of dX = b(X)dt + sigma(X)dW with killing rate r(X) on ]alpha, beta[.
/// `window` is the compact range the numerics resolve accurately; tails beyond
/// it are handled by quadrature or closed forms.
struct DiffusionSpec {
    RealFn drift;
    RealFn volatility;
    RealFn discount;
    Interval interval;
    Interval window;
    double discount_floor = 0;  ///< r0 with r >= r0 > 0
    Preset preset = Preset::Custom;
    PresetParams params{};

    double sigma2(double x) const {
        const double s = volatility(x);
        return s * s;
    }
};

DiffusionSpec geometric_bm(double drift, double volatility, double rate,
                           Interval window = {1e-6, 1e6});
DiffusionSpec brownian_motion(double drift, double volatility, double rate,
                              Interval window = {-40.0, 40.0});
DiffusionSpec ornstein_uhlenbeck(double mean_reversion, double long_run_mean, double volatility,
                                 double rate, std::optional<Interval> window = std::nullopt);
/// CIR: dX = k(theta - X)dt + sigma sqrt(X) dW on ]0, inf[.
DiffusionSpec cir(double mean_reversion, double long_run_mean, double volatility, double rate,
                  Interval window = {1e-4, 1e3});
DiffusionSpec custom_diffusion(RealFn drift, RealFn volatility, RealFn discount, Interval interval,
                               Interval window, double discount_floor);

struct AssumptionCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    std::optional<ErrorCode> failure;  ///< first blocking failure, if any

    bool ok() const { return !failure.has_value(); }
};

/// Probes the standing assumptions on a compact grid over the window.
ValidationReport validate_diffusion(const DiffusionSpec& spec, int probes = 257);
/// Same as validate_diffusion but throws the first failure.
void require_valid(const DiffusionSpec& spec);

namespace detail {
struct PairImpl;
}

/// Decreasing (phi) and increasing (psi) positive solutions of
/// 1/2 sigma^2 f'' + b f' - r f = 0 together with the Green weights.
class FundamentalPair {
public:
    FundamentalPair(std::shared_ptr<const detail::PairImpl> impl, DiffusionSpec spec, double kappa);

    double phi(double x) const;
    double dphi(double x) const;
    double psi(double x) const;
    double dpsi(double x) const;
    /// phi psi' - phi' psi
    double wronskian(double x) const;
    /// phi / (sigma^2 W), the right-tail weight
    double cap_phi(double x) const;
    /// psi / (sigma^2 W), the left-tail weight
    double cap_psi(double x) const;
    /// Normalization constant of the Green representation.
    double green_norm() const noexcept { return kappa_; }
    /// Range on which phi, psi can be evaluated.
    Interval support() const;
    bool closed_form() const;
    const DiffusionSpec& diffusion() const noexcept { return spec_; }

private:
    std::shared_ptr<const detail::PairImpl> impl_;
    DiffusionSpec spec_;
    double kappa_;
};

/// Closed forms for GBM and BM, numerical integration otherwise.
FundamentalPair fundamental_solutions(const DiffusionSpec& spec);
/// Forces the numerical route even for presets with closed forms.
FundamentalPair numerical_fundamental_solutions(const DiffusionSpec& spec, int nodes = 4097);

/// E_x[e^{-Lambda_{tau_z}}]: psi(x)/psi(z) for x < z, phi(x)/phi(z) otherwise.
double hitting_factor(const FundamentalPair& pair, double x, double z);

/// Roots (m, n), m < 0 < n, of 1/2 s^2 k(k-1) + b k - r for GBM.
struct PowerRoots {
    double m;
    double n;
};
PowerRoots gbm_roots(double drift, double volatility, double rate);
/// Roots of 1/2 s^2 k^2 + mu k - r for BM.
PowerRoots bm_roots(double drift, double volatility, double rate);

/// Chooses the Green normalization (1 or 2) by reconstructing g(x) = x from its
/// L-measure under a GBM reference. Cached after the first call.
double calibrate_green_norm();

}  // namespace dcstop
