#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcstop/diffusion.hpp"
#include "dcstop/measure.hpp"
#include "dcstop/payoff.hpp"
#include "dcstop/regions.hpp"

namespace dcstop {

enum class Scheme { EulerMaruyama, ExactGBM };

struct SimConfig {
    Scheme scheme = Scheme::EulerMaruyama;
    double dt = 0.01;
    double horizon = 0;  ///< 0: chosen so that exp(-r0 T) = discount_cap
    double discount_cap = 1e-6;
    std::size_t paths = 100000;
    std::uint64_t seed = 20240611;
    bool antithetic = true;
    unsigned threads = 0;  ///< 0: hardware concurrency
};

/// Exact stepping for GBM presets, Euler otherwise.
SimConfig default_sim_config(const DiffusionSpec& spec);

struct EstimateCI {
    double mean = 0;
    double std_error = 0;
    std::size_t paths_used = 0;
    double truncation_bias_bound = 0;
    double unstopped_fraction = 0;  ///< paths still running at the horizon
};

/// E_x0[exp(-Lambda_tau) g(X_tau)] for tau the first entry into the stopping
/// set of `region`. Throws UnstableScheme when a path leaves the domain.
EstimateCI estimate_value(const DiffusionSpec& spec, const PayoffDC& g, const RegionPartition& region, double x0,
                          const SimConfig& cfg);

/// E_x[exp(-Lambda_{tau_z})], the discount to the first hit of z.
EstimateCI estimate_hitting_factor(const DiffusionSpec& spec, double x, double z, const SimConfig& cfg);

struct PerturbationRow {
    std::string label;  ///< boundaries named a, b, ... in order: "b*(1+0.1)", "all*(1-0.1)"
    std::vector<double> boundaries;
    EstimateCI estimate;
};

/// Moves each finite boundary by factors (1 +- eps), alone and all together,
/// and estimates the value of the resulting hitting strategy. Rows use common
/// random numbers. The first row is the unperturbed strategy.
std::vector<PerturbationRow> perturbation_test(const DiffusionSpec& spec, const PayoffDC& g,
                                               const RegionPartition& region, double x0,
                                               const std::vector<double>& eps, const SimConfig& cfg);

/// Region with boundary `from` replaced by `to` in every component.
RegionPartition move_boundary(const RegionPartition& region, double from, double to);

struct DynkinResult {
    double residual = 0;   ///< mean of outer - inner - accumulated L g mass
    double std_error = 0;
    double outer = 0;      ///< E[exp(-Lambda_rho2) g(X_rho2)]
    double inner = 0;      ///< E[exp(-Lambda_rho1) g(X_rho1)]
    double accumulated = 0;
    std::size_t paths_used = 0;
};

/// rho1 = exit of `inner`, rho2 = exit of `outer` (inner inside outer, x0 in
/// inner). Atoms of L g enter through occupation time of [c - h, c + h]
/// divided by 2h.
DynkinResult dynkin_check(const DiffusionSpec& spec, const PayoffDC& g, const SignedMeasure& mu, double x0,
                          Interval inner, Interval outer, const SimConfig& cfg, double h = 0.01);

struct PsorGrid {
    double lo;
    double hi;
    int nodes = 4000;
    bool log_spaced = true;
    double omega = 0;  ///< 0: near-optimal for the grid size
    double tol = 1e-10;
    int max_sweeps = 400000;
};

struct PsorResult {
    std::vector<double> x;
    std::vector<double> v;
    std::vector<double> g;
    int sweeps = 0;
    double residual = 0;  ///< max |min(-L v, v - g)| scaled by the diagonal
    /// Grid points where v = g switches to v > g or back.
    std::vector<double> boundaries() const;
};

/// max(L v, g - v) = 0 on the grid with v = g at both ends. Throws
/// NoConvergence.
PsorResult psor_oracle(const DiffusionSpec& spec, const PayoffDC& g, const PsorGrid& grid);

}  // namespace dcstop
