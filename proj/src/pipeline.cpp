#include "dcstop/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "dcstop/errors.hpp"

namespace dcstop {

using nlohmann::json;

namespace {

RunStatus status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::InvalidArgument:
        case ErrorCode::StaircaseModeRequired:
        case ErrorCode::OutOfInterval:
            return RunStatus::BadInput;
        case ErrorCode::NonPositiveVolatility:
        case ErrorCode::DiscountBelowFloor:
        case ErrorCode::IntegrabilityProbeDiverged:
        case ErrorCode::NoDecayingSolutionFound:
        case ErrorCode::IntegrabilityFailure:
            return RunStatus::Rejected;
        default:
            return RunStatus::Unsolved;
    }
}

std::string fmt(double x, int digits = 10) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

/// Infinite values become strings so they survive JSON.
json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

double from_num(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    return std::nan("");
}

json interval_json(const Interval& i) { return json::array({num(i.lo), num(i.hi)}); }

/// Power j with g ~ x^j in the failing tail, read off two far probes.
std::string gate_message(const PayoffDC& g, const DiffusionSpec& spec, bool right) {
    if (spec.preset != Preset::GeometricBrownianMotion)
        return std::string("the Green-weighted variation of L g diverges toward the ") + (right ? "right" : "left") +
               " end of the state space";
    const double x1 = right ? spec.window.hi : spec.window.lo;
    const double x2 = right ? 10 * x1 : x1 / 10;
    const double j = std::log(std::abs(g(x2)) / std::abs(g(x1))) / std::log(x2 / x1);
    const double b = spec.params.drift, s2 = spec.params.volatility * spec.params.volatility;
    const double rhs = j * b + 0.5 * j * (j - 1) * s2;
    std::ostringstream os;
    os << "integrability gate r > j b + j(j-1) sigma^2 / 2 fails for g ~ x^j near "
       << (right ? "infinity" : "zero") << ": j = " << fmt(j) << ", r = " << fmt(spec.params.rate)
       << " <= " << fmt(rhs);
    return os.str();
}

Solution dispatch(const Classification& cls, const SignedMeasure& mu, const SignPattern& pattern,
                  const TurningPoints& tp, const PayoffDC& g, const FundamentalPair& pair, const SolverOptions& so) {
    switch (cls.label) {
        case CaseLabel::I: return solve_case_I(pair);
        case CaseLabel::II: return solve_case_II(pair);
        case CaseLabel::III: return solve_case_III(tp, g, pair);
        case CaseLabel::IV: return solve_case_IV(tp, g, pair);
        case CaseLabel::V: return solve_case_V(tp, g, pair);
        case CaseLabel::VI: {
            const QFunctionals q(mu, pair, so.q_nodes);
            return solve_case_VI(q, pattern, tp, g, cls.inferred);
        }
        case CaseLabel::Composite: break;
    }
    return paste_intervals(g, pair, so.hull_points);
}

/// One interior point per continuation component with a finite boundary.
std::vector<double> default_x0(const RegionPartition& p) {
    std::vector<double> out;
    const bool positive = p.domain.lo >= 0;
    for (const auto& c : p.continuation) {
        const bool lo = c.lo > p.domain.lo, hi = c.hi < p.domain.hi;
        if (lo && hi)
            out.push_back(positive && c.lo > 0 ? std::sqrt(c.lo * c.hi) : 0.5 * (c.lo + c.hi));
        else if (lo)
            out.push_back(positive ? 1.5 * c.lo : c.lo + 1.0);
        else if (hi)
            out.push_back(positive ? c.hi / 1.5 : c.hi - 1.0);
        if (out.size() == 3) break;
    }
    return out;
}

std::optional<PsorGrid> default_psor(const RegionPartition& p) {
    const auto bs = p.boundaries();
    if (bs.empty()) return std::nullopt;
    for (const auto& c : p.continuation)
        if (!(c.lo > p.domain.lo && c.hi < p.domain.hi)) return std::nullopt;  // Dirichlet ends would sit in C
    const double lo = bs.front(), hi = bs.back();
    if (p.domain.lo >= 0 && lo > 0) {
        PsorGrid g{std::max(lo / 20, p.domain.lo + 1e-12), std::min(hi * 15, p.domain.hi)};
        return g;
    }
    const double span = std::max(1.0, hi - lo);
    PsorGrid g{std::max(lo - 2 * span, p.domain.lo), std::min(hi + 2 * span, p.domain.hi)};
    g.log_spaced = false;
    return g;
}

PsorCheck run_psor(const DiffusionSpec& spec, const PayoffDC& g, const ValueFunction& v, const PsorGrid& grid,
                   const VerifyOptions& vo) {
    PsorCheck out;
    out.grid = grid;
    const auto res = psor_oracle(spec, g, grid);
    out.sweeps = res.sweeps;
    out.compared = grid.log_spaced ? Interval{grid.lo * 2, grid.hi / 2}
                                   : Interval{grid.lo + 0.1 * (grid.hi - grid.lo), grid.hi - 0.1 * (grid.hi - grid.lo)};
    for (std::size_t i = 0; i < res.x.size(); ++i) {
        const double x = res.x[i];
        if (x < out.compared.lo || x > out.compared.hi) continue;
        const double ref = v(x);
        out.sup_rel_error = std::max(out.sup_rel_error, std::abs(res.v[i] - ref) / std::max(std::abs(ref), 1e-12));
    }
    out.boundaries = res.boundaries();
    bool close = !out.boundaries.empty() || v.partition().boundaries().empty();
    for (double b : v.partition().boundaries()) {
        if (out.boundaries.empty()) break;
        const auto it = std::min_element(out.boundaries.begin(), out.boundaries.end(),
                                         [b](double p, double q) { return std::abs(p - b) < std::abs(q - b); });
        const auto k = static_cast<std::size_t>(std::lower_bound(res.x.begin(), res.x.end(), b) - res.x.begin());
        const std::size_t i = std::clamp<std::size_t>(k, 1, res.x.size() - 1);
        const double cells = std::abs(*it - b) / (res.x[i] - res.x[i - 1]);
        out.boundary_cells.push_back(cells);
        close = close && cells <= vo.psor_boundary_cells;
    }
    out.agrees = close && out.sup_rel_error <= vo.psor_rel_tol;
    return out;
}

void verify_stage(RunReport& rep, const Problem& pb, const PreparedProblem& prep) {
    const auto& v = *rep.value;
    const auto& so = pb.solver;
    rep.verification = verify_solution(v, verification_grid(v, so.verify_points), so.verify_tol);
    for (const auto& c : rep.verification->checks)
        if (!c.pass) rep.warnings.push_back(c.name + " fails at x = " + fmt(c.worst_x) + ": " + c.detail);
    rep.smooth_fit = smooth_fit_report(v, so.smooth_fit_tol);
    for (const auto& s : rep.smooth_fit)
        if (!s.holds) rep.warnings.push_back("fit inequalities fail at boundary " + fmt(s.x));

    const auto& spec = pb.diffusion;
    const auto& part = v.partition();
    if (part.boundaries().empty()) return;
    SimConfig cfg = pb.verify.sim;
    cfg.seed = rep.seed;
    if (rep.level == VerifyLevel::Fast) cfg.paths = pb.verify.fast_paths;
    const auto x0s = pb.verify.x0.empty() ? default_x0(part) : pb.verify.x0;
    try {
        for (double x0 : x0s) {
            McCheck m{x0, v(x0), estimate_value(spec, prep.g, part, x0, cfg), false};
            m.agrees = std::abs(m.estimate.mean - m.v) <= 3 * m.estimate.std_error + m.estimate.truncation_bias_bound;
            if (!m.agrees)
                rep.warnings.push_back("Monte Carlo at x0 = " + fmt(x0) + " gives " + fmt(m.estimate.mean) + " +- " +
                                       fmt(m.estimate.std_error) + " against v = " + fmt(m.v));
            rep.monte_carlo.push_back(m);
        }
        if (rep.level == VerifyLevel::Full && !x0s.empty() && !pb.verify.perturbation.empty()) {
            rep.perturbation = perturbation_test(spec, prep.g, part, x0s.front(), pb.verify.perturbation, cfg);
            const double vx = v(x0s.front());
            for (std::size_t i = 1; i < rep.perturbation.size(); ++i) {
                const auto& e = rep.perturbation[i].estimate;
                if (e.mean > vx + 3 * e.std_error + e.truncation_bias_bound)
                    rep.warnings.push_back("perturbed strategy " + rep.perturbation[i].label + " beats v: " +
                                           fmt(e.mean) + " > " + fmt(vx));
            }
        }
    } catch (const StoppingError& e) {
        rep.warnings.push_back(std::string("simulation: ") + e.what());
    }
    if (rep.level == VerifyLevel::Full) {
        const auto grid = pb.verify.psor ? pb.verify.psor : default_psor(part);
        if (!grid) return;
        try {
            rep.psor = run_psor(spec, prep.g, v, *grid, pb.verify);
            if (!rep.psor->agrees)
                rep.warnings.push_back("PSOR disagrees: sup relative error " + fmt(rep.psor->sup_rel_error));
        } catch (const StoppingError& e) {
            rep.warnings.push_back(std::string("PSOR: ") + e.what());
        }
    }
}

std::string describe(const Solution& s) {
    std::ostringstream os;
    os << "case " << to_string(s.label) << (s.inferred ? " (inferred)" : "");
    for (const auto& c : s.partition.continuation) {
        os << "; C component ]" << fmt(c.lo) << ", " << fmt(c.hi) << "[ with A = " << fmt(c.A) << ", B = " << fmt(c.B);
    }
    return os.str();
}

}  // namespace

int exit_code(RunStatus status) {
    switch (status) {
        case RunStatus::Solved: return 0;
        case RunStatus::BadInput: return 1;
        case RunStatus::Warnings: return 2;
        case RunStatus::Rejected: return 3;
        case RunStatus::Unsolved: return 4;
    }
    return 4;
}

std::string to_string(RunStatus status) {
    switch (status) {
        case RunStatus::Solved: return "solved";
        case RunStatus::BadInput: return "bad-input";
        case RunStatus::Warnings: return "solved-with-warnings";
        case RunStatus::Rejected: return "rejected";
        case RunStatus::Unsolved: return "unsolved";
    }
    return "unsolved";
}

PreparedProblem prepare(const Problem& pb) {
    auto pair = pb.solver.numerical_pair ? numerical_fundamental_solutions(pb.diffusion)
                                         : fundamental_solutions(pb.diffusion);
    auto g = pb.running ? running_payoff_to_terminal(*pb.running, pb.payoff, pair) : pb.payoff;
    return {std::move(pair), std::move(g)};
}

RunReport run_problem(const Problem& pb) { return run_problem(pb, pb.verify.level, pb.verify.sim.seed); }

RunReport run_problem(const Problem& pb, VerifyLevel level, std::uint64_t seed) {
    RunReport rep;
    rep.name = pb.name;
    rep.level = level;
    rep.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    auto fail = [&](RunStatus s, std::optional<ErrorCode> code, std::string msg) {
        rep.status = s;
        rep.error = code;
        rep.message = std::move(msg);
        return rep;
    };

    rep.validation = validate_diffusion(pb.diffusion);
    if (!rep.validation.ok()) {
        std::string why = "diffusion assumptions fail";
        for (const auto& c : rep.validation.checks)
            if (!c.passed) why += "; " + c.name + ": " + c.detail;
        return fail(RunStatus::Rejected, rep.validation.failure, why);
    }

    std::optional<PreparedProblem> prep;
    try {
        prep.emplace(prepare(pb));
        const auto& g = prep->g;
        const auto& pair = prep->pair;
        const bool jumps = g.has_value_jumps();
        const auto opts = default_scan(pair, pb.solver.scan_points);

        SignedMeasure mu;
        if (!jumps) {
            mu = lop_measure(g, pb.diffusion);
            rep.integrability = check_integrability(mu, pair);
            if (!rep.integrability->integrable) {
                const bool right = !rep.integrability->right.converged;
                const auto& tail = right ? rep.integrability->right : rep.integrability->left;
                return fail(RunStatus::Rejected, ErrorCode::IntegrabilityFailure,
                            gate_message(g, pb.diffusion, right) + " (" + tail.detail + ")");
            }
        }
        rep.growth = check_growth_limits(g, pair);
        if (!rep.growth->limits_hold)
            return fail(RunStatus::Rejected, ErrorCode::IntegrabilityFailure,
                        "growth limits |g|/phi -> 0 and |g|/psi -> 0 fail: " + rep.growth->detail);

        Solution sol;
        rep.turning = turning_points(g, mu, pair, opts);
        if (jumps) {
            sol = paste_intervals(g, pair, pb.solver.hull_points);
        } else {
            rep.pattern = sign_partition(mu, opts);
            rep.classification = classify(*rep.pattern, *rep.turning, g, pair);
            sol = dispatch(*rep.classification, mu, *rep.pattern, *rep.turning, g, pair, pb.solver);
        }
        rep.value.emplace(assemble(sol, g, pair));
        rep.message = describe(sol);
        rep.solution = std::move(sol);
    } catch (const StoppingError& e) {
        return fail(status_for(e.code()), e.code(), e.what());
    } catch (const std::exception& e) {
        return fail(RunStatus::Unsolved, std::nullopt, e.what());
    }
    rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (level != VerifyLevel::None) {
        try {
            verify_stage(rep, pb, *prep);
        } catch (const std::exception& e) {
            rep.warnings.push_back(std::string("verification aborted: ") + e.what());
        }
    }
    rep.status = rep.warnings.empty() ? RunStatus::Solved : RunStatus::Warnings;
    return rep;
}

nlohmann::json report_json(const RunReport& rep, const Problem& pb) {
    json j;
    j["schema_version"] = pb.schema_version;
    j["name"] = rep.name;
    j["status"] = to_string(rep.status);
    j["exit_code"] = exit_code(rep.status);
    j["message"] = rep.message;
    j["error"] = rep.error ? json(std::string(to_string(*rep.error))) : json();
    j["warnings"] = rep.warnings;
    j["parameters"] = pb.parameters;

    const auto& d = pb.diffusion;
    j["diffusion"] = {{"preset", to_string(d.preset)},
                      {"interval", interval_json(d.interval)},
                      {"window", interval_json(d.window)},
                      {"discount_floor", d.discount_floor}};
    json checks = json::array();
    for (const auto& c : rep.validation.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["validation"] = checks;
    if (rep.integrability) {
        auto tail = [](const TailDiagnostic& t) {
            return json{{"converged", t.converged}, {"diverged", t.diverged}, {"truncated", t.truncated},
                        {"value", num(t.value)}, {"detail", t.detail}};
        };
        j["integrability"] = {{"integrable", rep.integrability->integrable},
                              {"left", tail(rep.integrability->left)},
                              {"right", tail(rep.integrability->right)}};
    }
    if (rep.growth)
        j["growth"] = {{"limits_hold", rep.growth->limits_hold}, {"left", rep.growth->left},
                       {"right", rep.growth->right}, {"detail", rep.growth->detail}};

    json cls;
    if (rep.pattern) {
        cls["shape"] = rep.pattern->shape;
        cls["x_l"] = rep.pattern->x_l ? json(*rep.pattern->x_l) : json();
        cls["x_r"] = rep.pattern->x_r ? json(*rep.pattern->x_r) : json();
        json si = json::array();
        for (const auto& s : rep.pattern->sign_intervals)
            si.push_back({{"lo", num(s.lo)}, {"hi", num(s.hi)}, {"sign", std::string(1, to_char(s.sign))}});
        cls["sign_intervals"] = si;
        json at = json::array();
        for (const auto& a : rep.pattern->atom_signs)
            at.push_back({{"x", a.location}, {"weight", a.weight}, {"sign", std::string(1, to_char(a.sign))}});
        cls["atoms"] = at;
    }
    if (rep.turning) {
        auto tp = [](const std::optional<TurningPoint>& t) {
            return t ? json{{"location", t->location}, {"ratio", t->ratio}, {"global", t->global}} : json();
        };
        cls["turning_psi"] = tp(rep.turning->psi);
        cls["turning_phi"] = tp(rep.turning->phi);
    }
    if (rep.classification) {
        cls["label"] = to_string(rep.classification->label);
        cls["inferred"] = rep.classification->inferred;
        cls["evidence"] = rep.classification->evidence;
        cls["limit_psi_alpha"] = num(rep.classification->limit_psi_alpha);
        cls["limit_phi_beta"] = num(rep.classification->limit_phi_beta);
    }
    if (!cls.is_null()) j["classification"] = cls;

    if (rep.solution) {
        const auto& s = *rep.solution;
        json sj;
        sj["label"] = to_string(s.label);
        sj["inferred"] = s.inferred;
        sj["evidence"] = s.evidence;
        sj["domain"] = interval_json(s.partition.domain);
        json cont = json::array(), stop = json::array(), bounds = json::array();
        for (const auto& c : s.partition.continuation)
            cont.push_back({{"lo", num(c.lo)}, {"hi", num(c.hi)}, {"A", c.A}, {"B", c.B}});
        for (const auto& c : s.partition.stopping) stop.push_back({{"lo", num(c.lo)}, {"hi", num(c.hi)}});
        for (const auto& b : s.boundaries) bounds.push_back({{"x", b.x}, {"smooth", b.smooth}});
        sj["continuation"] = cont;
        sj["stopping"] = stop;
        sj["boundaries"] = bounds;
        if (s.pair) sj["pair"] = {{"a", s.pair->a}, {"b", s.pair->b}, {"A", s.pair->A}, {"B", s.pair->B}};
        if (s.vi) {
            const auto& vi = *s.vi;
            sj["case_vi"] = {{"q_phi_open", vi.q_phi_open},   {"q_phi_closed", vi.q_phi_closed},
                             {"q_psi_open", vi.q_psi_open},   {"q_psi_closed", vi.q_psi_closed},
                             {"A_integral", vi.A_integral},   {"B_integral", vi.B_integral},
                             {"slope_ratio", vi.slope_ratio}, {"slope_ratio_numeric", vi.slope_ratio_numeric}};
        }
        j["solution"] = sj;
    }

    json vj;
    vj["level"] = to_string(rep.level);
    vj["seed"] = rep.seed;
    if (rep.verification) {
        json cs = json::array();
        for (const auto& c : rep.verification->checks)
            cs.push_back({{"name", c.name}, {"pass", c.pass}, {"worst", num(c.worst)}, {"worst_x", num(c.worst_x)},
                          {"detail", c.detail}});
        vj["checks"] = cs;
        vj["growth_constant"] = num(rep.verification->growth_constant);
        vj["ok"] = rep.verification->ok();
    }
    json sf = json::array();
    for (const auto& s : rep.smooth_fit)
        sf.push_back({{"x", s.x}, {"left_gap", s.left_gap}, {"right_gap", s.right_gap}, {"value_jump", s.value_jump},
                      {"smooth", s.smooth}, {"holds", s.holds}});
    vj["smooth_fit"] = sf;
    auto est = [](const EstimateCI& e) {
        return json{{"mean", e.mean}, {"std_error", e.std_error}, {"paths", e.paths_used},
                    {"truncation_bias_bound", e.truncation_bias_bound}, {"unstopped_fraction", e.unstopped_fraction}};
    };
    json mc = json::array();
    for (const auto& m : rep.monte_carlo) mc.push_back({{"x0", m.x0}, {"v", m.v}, {"estimate", est(m.estimate)}, {"agrees", m.agrees}});
    vj["monte_carlo"] = mc;
    json pt = json::array();
    for (const auto& r : rep.perturbation) pt.push_back({{"label", r.label}, {"boundaries", r.boundaries}, {"estimate", est(r.estimate)}});
    vj["perturbation"] = pt;
    if (rep.psor)
        vj["psor"] = {{"range", json::array({rep.psor->grid.lo, rep.psor->grid.hi})},
                      {"nodes", rep.psor->grid.nodes},
                      {"sweeps", rep.psor->sweeps},
                      {"compared", interval_json(rep.psor->compared)},
                      {"sup_rel_error", rep.psor->sup_rel_error},
                      {"boundaries", rep.psor->boundaries},
                      {"boundary_cells", rep.psor->boundary_cells},
                      {"agrees", rep.psor->agrees}};
    j["verification"] = vj;
    j["timing"] = {{"solve_seconds", rep.solve_seconds}};
    return j;
}

RegionPartition partition_from_json(const nlohmann::json& report) {
    try {
        const auto& s = report.at("solution");
        RegionPartition p;
        const auto& d = s.at("domain");
        p.domain = {from_num(d.at(0)), from_num(d.at(1))};
        for (const auto& c : s.at("continuation"))
            p.continuation.push_back({from_num(c.at("lo")), from_num(c.at("hi")), c.at("A").get<double>(), c.at("B").get<double>()});
        for (const auto& c : s.at("stopping")) p.stopping.push_back({from_num(c.at("lo")), from_num(c.at("hi"))});
        return p;
    } catch (const json::exception& e) {
        throw StoppingError(ErrorCode::ParseError, std::string("report: ") + e.what());
    }
}

Interval output_range(const RunReport& rep, const Problem& pb) {
    if (pb.output.range) return *pb.output.range;
    const auto& w = pb.diffusion.window;
    std::vector<double> marks = rep.solution ? rep.solution->partition.boundaries() : std::vector<double>{};
    for (double y : pb.payoff.breakpoints()) marks.push_back(y);
    std::sort(marks.begin(), marks.end());
    if (marks.empty()) {
        if (!w.log_scaled()) return w;
        const double m = w.midpoint();
        return {std::max(w.lo, m / 100), std::min(w.hi, m * 100)};
    }
    if (w.lo >= 0 && marks.front() > 0)
        return {std::max(w.lo, marks.front() / 10), std::min(w.hi, marks.back() * 10)};
    const double span = std::max(1.0, marks.back() - marks.front());
    return {std::max(w.lo, marks.front() - 2 * span), std::min(w.hi, marks.back() + 2 * span)};
}

namespace {

struct Sampled {
    std::vector<double> x, g, v;
    std::vector<bool> cont;
};

Sampled sample(const RunReport& rep, const Problem& pb) {
    Sampled s;
    const auto r = output_range(rep, pb);
    std::vector<double> extra;
    if (rep.value) extra = rep.value->partition().boundaries();
    for (double y : rep.value->payoff().breakpoints()) extra.push_back(y);
    for (double x : scan_grid(r, pb.output.points, extra)) {
        if (x < r.lo || x > r.hi) continue;
        s.x.push_back(x);
        s.g.push_back(rep.value->payoff()(x));
        s.v.push_back((*rep.value)(x));
        s.cont.push_back(rep.value->in_continuation(x));
    }
    return s;
}

}  // namespace

std::string value_csv(const RunReport& rep, const Problem& pb) {
    std::string out = "x,g,v,region\n";
    if (!rep.value) return out;
    const auto s = sample(rep, pb);
    for (std::size_t i = 0; i < s.x.size(); ++i)
        out += fmt(s.x[i]) + "," + fmt(s.g[i]) + "," + fmt(s.v[i]) + "," + (s.cont[i] ? "C" : "D") + "\n";
    return out;
}

std::string value_svg(const RunReport& rep, const Problem& pb) {
    if (!rep.value) return {};
    const auto s = sample(rep, pb);
    const double W = 720, H = 440, L = 70, R = 20, T = 40, Bm = 50;
    const auto r = output_range(rep, pb);
    const bool logx = r.lo > 0 && r.hi / r.lo > 10;
    auto tx = [&](double x) { return logx ? std::log(x) : x; };
    double ylo = kInf, yhi = -kInf;
    for (std::size_t i = 0; i < s.x.size(); ++i)
        for (double y : {s.g[i], s.v[i]})
            if (std::isfinite(y)) ylo = std::min(ylo, y), yhi = std::max(yhi, y);
    if (!(yhi > ylo)) yhi = ylo + 1;
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
    auto px = [&](double x) { return L + (tx(x) - tx(r.lo)) / (tx(r.hi) - tx(r.lo)) * (W - L - R); };
    auto py = [&](double y) { return T + (yhi - y) / (yhi - ylo) * (H - T - Bm); };

    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << rep.name << ": "
       << (rep.solution ? "case " + to_string(rep.solution->label) : std::string("unsolved")) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - Bm
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double f = k / 4.0;
        const double xv = logx ? std::exp(tx(r.lo) + f * (tx(r.hi) - tx(r.lo))) : r.lo + f * (r.hi - r.lo);
        const double yv = ylo + f * (yhi - ylo);
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - Bm + 16 << "\" text-anchor=\"middle\">" << fmt(xv, 4) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv, 4) << "</text>\n";
    }
    for (double b : rep.value->partition().boundaries()) {
        if (b < r.lo || b > r.hi) continue;
        os << "<line x1=\"" << px(b) << "\" y1=\"" << T << "\" x2=\"" << px(b) << "\" y2=\"" << H - Bm
           << "\" stroke=\"#c0392b\" stroke-dasharray=\"5,4\"/>\n";
        os << "<text x=\"" << px(b) + 3 << "\" y=\"" << T + 14 << "\" fill=\"#c0392b\">" << fmt(b, 6) << "</text>\n";
    }
    auto poly = [&](const std::vector<double>& y, const char* colour, const char* extra) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.6\"" << extra << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(y[i])) os << px(s.x[i]) << "," << py(y[i]) << " ";
        os << "\"/>\n";
    };
    poly(s.g, "#7f8c8d", " stroke-dasharray=\"3,3\"");
    poly(s.v, "#2c6fbb", "");
    os << "<text x=\"" << W - R - 110 << "\" y=\"" << T + 16 << "\" fill=\"#2c6fbb\">v (value)</text>\n";
    os << "<text x=\"" << W - R - 110 << "\" y=\"" << T + 32 << "\" fill=\"#7f8c8d\">g (payoff)</text>\n";
    os << "<text x=\"" << (W + L - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">x" << (logx ? " (log scale)" : "")
       << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::vector<std::filesystem::path> write_artifacts(const RunReport& rep, const Problem& pb,
                                                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    auto put = [&](const std::string& file, const std::string& text) {
        const auto p = dir / file;
        std::ofstream f(p, std::ios::binary);
        f << text;
        if (!f) throw StoppingError(ErrorCode::InvalidArgument, "cannot write " + p.string());
        out.push_back(p);
    };
    if (pb.output.json) put("report.json", report_json(rep, pb).dump(2) + "\n");
    if (pb.output.csv && rep.value) put("value.csv", value_csv(rep, pb));
    if (pb.output.svg && rep.value) put("value.svg", value_svg(rep, pb));
    return out;
}

std::vector<SweepRow> sweep(const std::string& text, const std::string& parameter, double from, double to,
                            double step, unsigned threads) {
    // Fails early (ParseError) on a broken file or an undeclared parameter.
    const auto base = parse_problem(text);
    if (!base.parameters.count(parameter))
        throw StoppingError(ErrorCode::ParseError, "parameter '" + parameter + "' is not declared in the problem file");
    std::vector<double> values;
    if (step > 0 && to >= from)
        for (std::size_t i = 0;; ++i) {
            const double x = from + static_cast<double>(i) * step;
            if (x > to + 1e-9 * step) break;
            values.push_back(x);
        }

    std::vector<SweepRow> rows(values.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < values.size();) {
            SweepRow& row = rows[i];
            row.value = values[i];
            try {
                const auto pb = parse_problem(text, {{parameter, values[i]}});
                const auto rep = run_problem(pb, VerifyLevel::None, pb.verify.sim.seed);
                row.status = rep.status;
                row.message = rep.message;
                if (!rep.solution) continue;
                const auto& s = *rep.solution;
                row.label = to_string(s.label);
                row.inferred = s.inferred;
                const auto& p = s.partition;
                row.boundaries = p.boundaries();
                if (p.continuation.size() == 1) {
                    const auto& c = p.continuation.front();
                    if (c.lo > p.domain.lo) row.a = c.lo;
                    if (c.hi < p.domain.hi) row.b = c.hi;
                    row.A = c.A;
                    row.B = c.B;
                } else if (row.boundaries.size() == 2) {
                    row.a = row.boundaries[0];
                    row.b = row.boundaries[1];
                }
            } catch (const StoppingError& e) {
                row.status = status_for(e.code());
                row.message = e.what();
            } catch (const std::exception& e) {
                row.status = RunStatus::Unsolved;
                row.message = e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads ? threads : std::thread::hardware_concurrency(),
                                                        static_cast<unsigned>(values.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& parameter) {
    std::string out = parameter + ",case,inferred,a,b,A,B,boundaries,status,message\n";
    auto opt = [](const std::optional<double>& x) { return x ? fmt(*x) : std::string(); };
    for (const auto& r : rows) {
        std::string bs;
        for (std::size_t i = 0; i < r.boundaries.size(); ++i) bs += (i ? ";" : "") + fmt(r.boundaries[i]);
        std::string msg = r.message;
        std::string quoted = "\"";
        for (char c : msg) quoted += (c == '"') ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
        quoted += "\"";
        out += fmt(r.value) + "," + r.label + "," + (r.inferred ? "1" : "0") + "," + opt(r.a) + "," + opt(r.b) + "," +
               opt(r.A) + "," + opt(r.B) + "," + bs + "," + to_string(r.status) + "," + quoted + "\n";
    }
    return out;
}

}  // namespace dcstop
