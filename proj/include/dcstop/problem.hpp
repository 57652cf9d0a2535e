#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcstop/diffusion.hpp"
#include "dcstop/payoff.hpp"
#include "dcstop/verifier.hpp"

namespace dcstop {

inline constexpr int kSchemaVersion = 1;

using ParameterMap = std::map<std::string, double>;

/// Arithmetic over numbers and named parameters: + - * / ^, parentheses,
/// sqrt/exp/log/abs. Throws ParseError.
double evaluate_expression(std::string_view expr, const ParameterMap& params);

enum class VerifyLevel { None, Fast, Full };

std::string to_string(VerifyLevel level);
/// Accepts none/fast/full; throws ParseError otherwise.
VerifyLevel parse_verify_level(std::string_view text);

struct SolverOptions {
    int scan_points = 2048;
    int q_nodes = 4096;
    int hull_points = 4096;
    int verify_points = 1000;
    double verify_tol = 1e-8;
    double smooth_fit_tol = 1e-6;
    bool numerical_pair = false;  ///< skip closed forms even for GBM/BM
};

struct VerifyOptions {
    VerifyLevel level = VerifyLevel::Fast;
    SimConfig sim;                  ///< full level; paths as given
    std::size_t fast_paths = 20000;  ///< MC paths at the fast level
    std::vector<double> x0;          ///< empty: one point per continuation component
    std::vector<double> perturbation{0.1};
    std::optional<PsorGrid> psor;  ///< unset: chosen from the boundaries
    double psor_rel_tol = 0.01;
    int psor_boundary_cells = 2;
};

struct OutputOptions {
    std::string dir = "out";
    bool json = true;
    bool csv = true;
    bool svg = true;
    std::optional<Interval> range;  ///< CSV/plot range; unset: around the boundaries
    int points = 400;
};

struct Problem {
    int schema_version = kSchemaVersion;
    std::string name;
    ParameterMap parameters;
    DiffusionSpec diffusion;
    PayoffDC payoff{constant_piece(0.0)};  ///< terminal payoff, or the cost G when `running` is set
    std::optional<PayoffDC> running;       ///< running reward H
    SolverOptions solver;
    VerifyOptions verify;
    OutputOptions output;
};

/// Parses a YAML problem. `overrides` replace entries of the parameters block
/// (and must name existing ones). Throws ParseError.
Problem parse_problem(const std::string& text, const ParameterMap& overrides = {});
Problem load_problem(const std::string& path, const ParameterMap& overrides = {});
std::string read_text_file(const std::string& path);

}  // namespace dcstop
