// Command-line front end: solve one problem file or sweep a parameter.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>

#include "dcstop/errors.hpp"
#include "dcstop/pipeline.hpp"

using namespace dcstop;

namespace {

ParameterMap parse_sets(const std::vector<std::string>& sets) {
    ParameterMap out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw StoppingError(ErrorCode::ParseError, "--set expects name=value, got '" + s + "'");
        out[s.substr(0, eq)] = evaluate_expression(s.substr(eq + 1), {});
    }
    return out;
}

int solve(const std::string& file, const std::optional<std::string>& level, const std::optional<std::uint64_t>& seed,
          const std::optional<std::string>& out_dir, const std::vector<std::string>& sets) {
    const auto pb = load_problem(file, parse_sets(sets));
    const auto lvl = level ? parse_verify_level(*level) : pb.verify.level;
    const auto rep = run_problem(pb, lvl, seed.value_or(pb.verify.sim.seed));

    std::cout << pb.name << ": " << to_string(rep.status) << "\n" << rep.message << "\n";
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
    for (const auto& p : write_artifacts(rep, pb, out_dir.value_or(pb.output.dir))) std::cout << "wrote " << p.string() << "\n";
    return exit_code(rep.status);
}

int run_sweep(const std::string& file, const std::string& param, double from, double to, double step,
              const std::optional<std::string>& out_dir) {
    const auto rows = sweep(read_text_file(file), param, from, to, step);
    const auto csv = sweep_csv(rows, param);
    std::cout << csv;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        const auto path = std::filesystem::path(*out_dir) / "sweep.csv";
        std::ofstream(path, std::ios::binary) << csv;
        std::cerr << "wrote " << path.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal stopping of one-dimensional diffusions: free boundaries and value functions"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::string> level, out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--verify-level", level, "none, fast or full (default: the file's verify.level)")
        ->check(CLI::IsMember({"none", "fast", "full"}));
    app.add_option("--seed", seed, "Monte Carlo seed");
    app.add_option("--out-dir", out_dir, "artifact directory (default: the file's output.dir)");

    std::string file;
    std::vector<std::string> sets;
    auto* solve_cmd = app.add_subcommand("solve", "solve a problem file and write report.json, value.csv, value.svg");
    solve_cmd->add_option("file", file, "YAML problem file")->required();
    solve_cmd->add_option("--set", sets, "override a declared parameter, name=value");

    std::string param;
    double from = 0, to = 0, step = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "re-solve across a parameter range and print CSV");
    sweep_cmd->add_option("file", file, "YAML problem file")->required();
    sweep_cmd->add_option("--param", param, "parameter name")->required();
    sweep_cmd->add_option("--from", from)->required();
    sweep_cmd->add_option("--to", to)->required();
    sweep_cmd->add_option("--step", step)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve_cmd) return solve(file, level, seed, out_dir, sets);
        return run_sweep(file, param, from, to, step, out_dir);
    } catch (const StoppingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::ParseError ? 1 : 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
