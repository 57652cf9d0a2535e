#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcstop/boundary_solver.hpp"
#include "dcstop/problem.hpp"
#include "dcstop/value_function.hpp"
#include "dcstop/verifier.hpp"

namespace dcstop {

enum class RunStatus { Solved, Warnings, Rejected, Unsolved, BadInput };

/// 0 solved and verified, 1 bad input, 2 verification warnings,
/// 3 well-posedness rejection, 4 unclassifiable or no crossing.
int exit_code(RunStatus status);
std::string to_string(RunStatus status);

struct McCheck {
    double x0;
    double v;  ///< analytic value
    EstimateCI estimate;
    bool agrees;  ///< |estimate - v| <= 3 SE + truncation bias
};

struct PsorCheck {
    PsorGrid grid;
    int sweeps = 0;
    Interval compared;  ///< range of the sup-error comparison
    double sup_rel_error = 0;
    std::vector<double> boundaries;        ///< PSOR switch points
    std::vector<double> boundary_cells;    ///< distance to the analytic boundary in grid cells
    bool agrees = false;
};

struct RunReport {
    std::string name;
    RunStatus status = RunStatus::Solved;
    std::string message;
    std::optional<ErrorCode> error;
    std::vector<std::string> warnings;

    ValidationReport validation;
    std::optional<IntegrabilityReport> integrability;
    std::optional<GrowthReport> growth;
    std::optional<SignPattern> pattern;
    std::optional<TurningPoints> turning;
    std::optional<Classification> classification;
    std::optional<Solution> solution;
    std::optional<ValueFunction> value;
    std::optional<VerificationReport> verification;
    std::vector<SmoothFitGap> smooth_fit;

    VerifyLevel level = VerifyLevel::Fast;
    std::uint64_t seed = 0;
    std::vector<McCheck> monte_carlo;
    std::vector<PerturbationRow> perturbation;
    std::optional<PsorCheck> psor;
    double solve_seconds = 0;
};

/// validate -> measure -> well-posedness -> classify -> solve -> assemble -> verify.
/// Solver errors end up in the report, never as exceptions.
RunReport run_problem(const Problem& problem, VerifyLevel level, std::uint64_t seed);
RunReport run_problem(const Problem& problem);

/// Solve stage only: the effective payoff (running reward folded in) and the pair.
struct PreparedProblem {
    FundamentalPair pair;
    PayoffDC g;
};
PreparedProblem prepare(const Problem& problem);

nlohmann::json report_json(const RunReport& report, const Problem& problem);

/// Partition stored in a report, for re-verification.
RegionPartition partition_from_json(const nlohmann::json& report);

/// Range of the value CSV and plot.
Interval output_range(const RunReport& report, const Problem& problem);
/// Columns x,g,v,region with region C (continuation) or D (stopping).
std::string value_csv(const RunReport& report, const Problem& problem);
std::string value_svg(const RunReport& report, const Problem& problem);

/// Writes report.json, value.csv and value.svg as enabled by the output block.
std::vector<std::filesystem::path> write_artifacts(const RunReport& report, const Problem& problem,
                                                   const std::filesystem::path& dir);

struct SweepRow {
    double value;
    std::string label;  ///< case label, empty on failure
    bool inferred = false;
    std::optional<double> a, b, A, B;
    std::vector<double> boundaries;
    RunStatus status = RunStatus::Solved;
    std::string message;
};

/// Re-solves the problem text at from, from + step, ... <= to (concurrently).
/// An empty range (step <= 0 or to < from) gives no rows.
std::vector<SweepRow> sweep(const std::string& problem_text, const std::string& parameter, double from, double to,
                            double step, unsigned threads = 0);
/// Columns <parameter>,case,inferred,a,b,A,B,boundaries,status,message.
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& parameter);

}  // namespace dcstop
