#include "dcstop/problem.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcstop/errors.hpp"

namespace dcstop {

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw StoppingError(ErrorCode::ParseError, msg); }

class ExprParser {
public:
    ExprParser(std::string_view s, const ParameterMap& p) : s_(s), params_(p) {}

    double run() {
        const double v = expr();
        skip();
        if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
        return v;
    }

private:
    std::string_view s_;
    const ParameterMap& params_;
    std::size_t i_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        parse_fail("expression '" + std::string(s_) + "': " + what);
    }
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool eat(char c) {
        skip();
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }

    double expr() {
        double v = term();
        for (;;) {
            if (eat('+'))
                v += term();
            else if (eat('-'))
                v -= term();
            else
                return v;
        }
    }
    double term() {
        double v = factor();
        for (;;) {
            if (eat('*'))
                v *= factor();
            else if (eat('/'))
                v /= factor();
            else
                return v;
        }
    }
    double factor() {
        if (eat('-')) return -factor();
        if (eat('+')) return factor();
        const double base = primary();
        if (eat('^')) return std::pow(base, factor());
        return base;
    }
    double primary() {
        skip();
        if (i_ >= s_.size()) fail("unexpected end");
        if (eat('(')) {
            const double v = expr();
            if (!eat(')')) fail("missing ')'");
            return v;
        }
        const char c = s_[i_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(s_.substr(i_));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("bad number");
            i_ += static_cast<std::size_t>(end - rest.c_str());
            return v;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = i_;
            while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
            const std::string name(s_.substr(start, i_ - start));
            if (eat('(')) {
                const double arg = expr();
                if (!eat(')')) fail("missing ')'");
                if (name == "sqrt") return std::sqrt(arg);
                if (name == "exp") return std::exp(arg);
                if (name == "log") return std::log(arg);
                if (name == "abs") return std::abs(arg);
                fail("unknown function " + name);
            }
            if (name == "inf") return kInf;
            const auto it = params_.find(name);
            if (it == params_.end()) fail("unknown parameter " + name);
            return it->second;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }
};

struct Ctx {
    const ParameterMap& params;

    double num(const YAML::Node& n, const std::string& where) const {
        if (!n || !n.IsScalar()) parse_fail(where + ": expected a number or expression");
        const double v = evaluate_expression(n.Scalar(), params);
        if (std::isnan(v)) parse_fail(where + ": evaluates to NaN");
        return v;
    }
    double num_or(const YAML::Node& n, const std::string& where, double fallback) const {
        return n ? num(n, where) : fallback;
    }
    std::vector<double> list(const YAML::Node& n, const std::string& where) const {
        if (!n) return {};
        if (!n.IsSequence()) parse_fail(where + ": expected a list");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(num(n[i], where + "[" + std::to_string(i) + "]"));
        return out;
    }
    Interval interval(const YAML::Node& n, const std::string& where) const {
        const auto v = list(n, where);
        if (v.size() != 2 || !(v[0] < v[1])) parse_fail(where + ": expected [lo, hi] with lo < hi");
        return {v[0], v[1]};
    }
};

template <class T>
T scalar_as(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        parse_fail(where + ": wrong type");
    }
}

void reject_unknown(const YAML::Node& n, std::initializer_list<std::string_view> known, const std::string& where) {
    if (!n.IsMap()) parse_fail(where + ": expected a mapping");
    for (const auto& kv : n) {
        const auto key = kv.first.Scalar();
        if (std::find(known.begin(), known.end(), key) == known.end()) parse_fail(where + ": unknown key '" + key + "'");
    }
}

/// One term: {poly: [c0, c1, ...]}, {coef, power} or {coef, exp}.
Piece parse_term(const Ctx& ctx, const YAML::Node& n, const std::string& where) {
    reject_unknown(n, {"poly", "coef", "power", "exp"}, where);
    if (n["poly"]) {
        if (n["power"] || n["exp"] || n["coef"]) parse_fail(where + ": poly excludes coef/power/exp");
        const auto c = ctx.list(n["poly"], where + ".poly");
        if (c.empty()) parse_fail(where + ".poly: empty");
        return polynomial(c);
    }
    const double coef = ctx.num_or(n["coef"], where + ".coef", 1.0);
    if (n["power"] && n["exp"]) parse_fail(where + ": power and exp are exclusive");
    if (n["exp"]) return exp_term(coef, ctx.num(n["exp"], where + ".exp"));
    const double p = ctx.num_or(n["power"], where + ".power", 0.0);
    if (p == std::floor(p) && p >= 0 && p <= 16) {
        std::vector<double> c(static_cast<std::size_t>(p) + 1, 0.0);
        c.back() = coef;
        return polynomial(c);
    }
    return power_term(coef, p);
}

/// A piece is a term, a list of terms (summed), or a bare scalar constant.
Piece parse_piece(const Ctx& ctx, const YAML::Node& n, const std::string& where) {
    if (n.IsScalar()) return constant_piece(ctx.num(n, where));
    if (n.IsMap()) return parse_term(ctx, n, where);
    if (!n.IsSequence() || n.size() == 0) parse_fail(where + ": expected a term or a non-empty list of terms");
    Piece sum = parse_term(ctx, n[0], where + "[0]");
    for (std::size_t i = 1; i < n.size(); ++i) sum = sum + parse_term(ctx, n[i], where + "[" + std::to_string(i) + "]");
    return sum;
}

PayoffDC parse_payoff_block(const Ctx& ctx, const YAML::Node& n, const std::string& where, const Interval& domain,
                            bool allow_running) {
    if (allow_running)
        reject_unknown(n, {"breakpoints", "pieces", "staircase", "running"}, where);
    else
        reject_unknown(n, {"breakpoints", "pieces", "staircase"}, where);
    const auto br = ctx.list(n["breakpoints"], where + ".breakpoints");
    for (std::size_t i = 0; i < br.size(); ++i) {
        if (!domain.contains(br[i])) parse_fail(where + ".breakpoints: " + std::to_string(br[i]) + " outside the domain");
        if (i > 0 && !(br[i] > br[i - 1])) parse_fail(where + ".breakpoints: must increase");
    }
    const auto pn = n["pieces"];
    if (!pn || !pn.IsSequence()) parse_fail(where + ".pieces: required list");
    if (pn.size() != br.size() + 1)
        parse_fail(where + ".pieces: need " + std::to_string(br.size() + 1) + " pieces for " +
                   std::to_string(br.size()) + " breakpoints");
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i < pn.size(); ++i) pieces.push_back(parse_piece(ctx, pn[i], where + ".pieces[" + std::to_string(i) + "]"));
    const bool staircase = n["staircase"] ? scalar_as<bool>(n["staircase"], where + ".staircase") : false;
    try {
        return PayoffDC(br, pieces, staircase);
    } catch (const StoppingError& e) {
        parse_fail(where + ": " + e.what());
    }
}

/// Scalar constant or {breakpoints, pieces: [[c0, c1, ...], ...]} in x.
RealFn parse_coefficient(const Ctx& ctx, const YAML::Node& n, const std::string& where) {
    if (!n) parse_fail(where + ": required");
    if (n.IsScalar()) {
        const double c = ctx.num(n, where);
        return [c](double) { return c; };
    }
    reject_unknown(n, {"breakpoints", "pieces"}, where);
    auto br = ctx.list(n["breakpoints"], where + ".breakpoints");
    const auto pn = n["pieces"];
    if (!pn || !pn.IsSequence() || pn.size() != br.size() + 1)
        parse_fail(where + ".pieces: need one coefficient list per piece");
    std::vector<std::vector<double>> coeffs;
    for (std::size_t i = 0; i < pn.size(); ++i) coeffs.push_back(ctx.list(pn[i], where + ".pieces[" + std::to_string(i) + "]"));
    return [br = std::move(br), coeffs = std::move(coeffs)](double x) {
        const auto k = static_cast<std::size_t>(std::upper_bound(br.begin(), br.end(), x) - br.begin());
        double s = 0;
        for (auto it = coeffs[k].rbegin(); it != coeffs[k].rend(); ++it) s = s * x + *it;
        return s;
    };
}

DiffusionSpec parse_diffusion(const Ctx& ctx, const YAML::Node& n) {
    if (!n) parse_fail("diffusion: required");
    reject_unknown(n, {"preset", "drift", "volatility", "rate", "mean_reversion", "long_run_mean", "window", "interval",
                       "discount", "discount_floor"},
                   "diffusion");
    const auto preset = n["preset"] ? scalar_as<std::string>(n["preset"], "diffusion.preset") : std::string("custom");
    std::optional<Interval> window;
    if (n["window"]) window = ctx.interval(n["window"], "diffusion.window");
    auto p = [&](const char* key, double fallback) { return ctx.num_or(n[key], std::string("diffusion.") + key, fallback); };
    auto need = [&](const char* key) {
        if (!n[key]) parse_fail(std::string("diffusion.") + key + ": required for preset " + preset);
        return p(key, 0.0);
    };

    if (preset == "gbm") return geometric_bm(p("drift", 0.0), need("volatility"), need("rate"), window.value_or(Interval{1e-6, 1e6}));
    if (preset == "bm") return brownian_motion(p("drift", 0.0), need("volatility"), need("rate"), window.value_or(Interval{-40.0, 40.0}));
    if (preset == "ou")
        return ornstein_uhlenbeck(need("mean_reversion"), p("long_run_mean", 0.0), need("volatility"), need("rate"), window);
    if (preset == "cir")
        return cir(need("mean_reversion"), need("long_run_mean"), need("volatility"), need("rate"),
                   window.value_or(Interval{1e-4, 1e3}));
    if (preset != "custom") parse_fail("diffusion.preset: unknown preset '" + preset + "'");

    const Interval interval = n["interval"] ? ctx.interval(n["interval"], "diffusion.interval") : Interval{};
    if (!window) parse_fail("diffusion.window: required for custom diffusions");
    const double floor = need("discount_floor");
    return custom_diffusion(parse_coefficient(ctx, n["drift"], "diffusion.drift"),
                            parse_coefficient(ctx, n["volatility"], "diffusion.volatility"),
                            parse_coefficient(ctx, n["discount"], "diffusion.discount"), interval, *window, floor);
}

SolverOptions parse_solver(const Ctx& ctx, const YAML::Node& n) {
    SolverOptions s;
    if (!n) return s;
    reject_unknown(n, {"scan_points", "q_nodes", "hull_points", "verify_points", "verify_tol", "smooth_fit_tol", "numerical"},
                   "solver");
    auto count = [&](const char* key, int fallback) {
        const double v = ctx.num_or(n[key], std::string("solver.") + key, fallback);
        if (v < 16 || v > 1e7 || v != std::floor(v)) parse_fail(std::string("solver.") + key + ": expected an integer >= 16");
        return static_cast<int>(v);
    };
    s.scan_points = count("scan_points", s.scan_points);
    s.q_nodes = count("q_nodes", s.q_nodes);
    s.hull_points = count("hull_points", s.hull_points);
    s.verify_points = count("verify_points", s.verify_points);
    s.verify_tol = ctx.num_or(n["verify_tol"], "solver.verify_tol", s.verify_tol);
    s.smooth_fit_tol = ctx.num_or(n["smooth_fit_tol"], "solver.smooth_fit_tol", s.smooth_fit_tol);
    if (n["numerical"]) s.numerical_pair = scalar_as<bool>(n["numerical"], "solver.numerical");
    return s;
}

VerifyOptions parse_verify(const Ctx& ctx, const YAML::Node& n, const DiffusionSpec& spec) {
    VerifyOptions v;
    v.sim = default_sim_config(spec);
    if (!n) return v;
    reject_unknown(n, {"level", "x0", "paths", "fast_paths", "dt", "seed", "scheme", "antithetic", "threads",
                       "discount_cap", "perturbation", "psor", "psor_rel_tol", "psor_boundary_cells"},
                   "verify");
    if (n["level"]) v.level = parse_verify_level(scalar_as<std::string>(n["level"], "verify.level"));
    v.x0 = ctx.list(n["x0"], "verify.x0");
    for (double x : v.x0)
        if (!spec.interval.contains(x)) parse_fail("verify.x0: " + std::to_string(x) + " outside the domain");
    auto positive = [&](const char* key, double fallback) {
        const double x = ctx.num_or(n[key], std::string("verify.") + key, fallback);
        if (!(x > 0)) parse_fail(std::string("verify.") + key + ": must be positive");
        return x;
    };
    v.sim.paths = static_cast<std::size_t>(positive("paths", static_cast<double>(v.sim.paths)));
    v.fast_paths = static_cast<std::size_t>(positive("fast_paths", static_cast<double>(v.fast_paths)));
    v.sim.dt = positive("dt", v.sim.dt);
    v.sim.discount_cap = positive("discount_cap", v.sim.discount_cap);
    if (n["seed"]) v.sim.seed = scalar_as<std::uint64_t>(n["seed"], "verify.seed");
    if (n["threads"]) v.sim.threads = scalar_as<unsigned>(n["threads"], "verify.threads");
    if (n["antithetic"]) v.sim.antithetic = scalar_as<bool>(n["antithetic"], "verify.antithetic");
    if (n["scheme"]) {
        const auto s = scalar_as<std::string>(n["scheme"], "verify.scheme");
        if (s == "euler")
            v.sim.scheme = Scheme::EulerMaruyama;
        else if (s == "exact" && spec.preset == Preset::GeometricBrownianMotion)
            v.sim.scheme = Scheme::ExactGBM;
        else
            parse_fail("verify.scheme: '" + s + "' (euler, or exact for gbm)");
    }
    if (n["perturbation"]) v.perturbation = ctx.list(n["perturbation"], "verify.perturbation");
    v.psor_rel_tol = ctx.num_or(n["psor_rel_tol"], "verify.psor_rel_tol", v.psor_rel_tol);
    v.psor_boundary_cells = static_cast<int>(ctx.num_or(n["psor_boundary_cells"], "verify.psor_boundary_cells",
                                                        v.psor_boundary_cells));
    if (const auto ps = n["psor"]) {
        reject_unknown(ps, {"range", "nodes", "log_spaced", "tol", "max_sweeps"}, "verify.psor");
        const auto r = ctx.interval(ps["range"], "verify.psor.range");
        PsorGrid g{r.lo, r.hi};
        g.nodes = static_cast<int>(ctx.num_or(ps["nodes"], "verify.psor.nodes", g.nodes));
        g.log_spaced = ps["log_spaced"] ? scalar_as<bool>(ps["log_spaced"], "verify.psor.log_spaced") : r.lo > 0;
        g.tol = ctx.num_or(ps["tol"], "verify.psor.tol", g.tol);
        g.max_sweeps = static_cast<int>(ctx.num_or(ps["max_sweeps"], "verify.psor.max_sweeps", g.max_sweeps));
        if (!spec.interval.contains(r.lo) || !spec.interval.contains(r.hi)) parse_fail("verify.psor.range: outside the domain");
        v.psor = g;
    }
    return v;
}

OutputOptions parse_output(const Ctx& ctx, const YAML::Node& n) {
    OutputOptions o;
    if (!n) return o;
    reject_unknown(n, {"dir", "formats", "range", "points"}, "output");
    if (n["dir"]) o.dir = scalar_as<std::string>(n["dir"], "output.dir");
    if (const auto f = n["formats"]) {
        if (!f.IsSequence()) parse_fail("output.formats: expected a list");
        o.json = o.csv = o.svg = false;
        for (const auto& e : f) {
            const auto s = scalar_as<std::string>(e, "output.formats");
            if (s == "json")
                o.json = true;
            else if (s == "csv")
                o.csv = true;
            else if (s == "svg")
                o.svg = true;
            else
                parse_fail("output.formats: unknown format '" + s + "'");
        }
    }
    if (n["range"]) o.range = ctx.interval(n["range"], "output.range");
    const double pts = ctx.num_or(n["points"], "output.points", o.points);
    if (pts < 2 || pts > 1e6) parse_fail("output.points: out of range");
    o.points = static_cast<int>(pts);
    return o;
}

}  // namespace

double evaluate_expression(std::string_view expr, const ParameterMap& params) { return ExprParser(expr, params).run(); }

std::string to_string(VerifyLevel level) {
    switch (level) {
        case VerifyLevel::None: return "none";
        case VerifyLevel::Fast: return "fast";
        case VerifyLevel::Full: return "full";
    }
    return "fast";
}

VerifyLevel parse_verify_level(std::string_view text) {
    if (text == "none") return VerifyLevel::None;
    if (text == "fast") return VerifyLevel::Fast;
    if (text == "full") return VerifyLevel::Full;
    parse_fail("verify level '" + std::string(text) + "' (none, fast, full)");
}

Problem parse_problem(const std::string& text, const ParameterMap& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        parse_fail(std::string("YAML: ") + e.what());
    }
    if (!root || !root.IsMap()) parse_fail("top level must be a mapping");
    reject_unknown(root, {"schema_version", "name", "parameters", "diffusion", "payoff", "solver", "verify", "output"},
                   "problem");

    Problem pb;
    if (!root["schema_version"]) parse_fail("schema_version: required");
    pb.schema_version = scalar_as<int>(root["schema_version"], "schema_version");
    if (pb.schema_version != kSchemaVersion)
        parse_fail("schema_version " + std::to_string(pb.schema_version) + " unsupported (expected " +
                   std::to_string(kSchemaVersion) + ")");
    pb.name = root["name"] ? scalar_as<std::string>(root["name"], "name") : std::string("problem");

    // Parameters may refer to earlier ones.
    if (const auto p = root["parameters"]) {
        if (!p.IsMap()) parse_fail("parameters: expected a mapping");
        for (const auto& kv : p) {
            const auto key = kv.first.Scalar();
            if (key.empty() || !(std::isalpha(static_cast<unsigned char>(key[0])) || key[0] == '_'))
                parse_fail("parameters: bad name '" + key + "'");
            pb.parameters[key] = Ctx{pb.parameters}.num(kv.second, "parameters." + key);
        }
    }
    for (const auto& [k, v] : overrides) {
        if (!pb.parameters.count(k)) parse_fail("parameter '" + k + "' is not declared in the problem file");
        pb.parameters[k] = v;
    }
    const Ctx ctx{pb.parameters};

    try {
        pb.diffusion = parse_diffusion(ctx, root["diffusion"]);
    } catch (const StoppingError& e) {
        if (e.code() == ErrorCode::ParseError) throw;
        parse_fail(std::string("diffusion: ") + e.what());
    }
    const auto pay = root["payoff"];
    if (!pay) parse_fail("payoff: required");
    pb.payoff = parse_payoff_block(ctx, pay, "payoff", pb.diffusion.interval, true);
    if (pay["running"]) pb.running = parse_payoff_block(ctx, pay["running"], "payoff.running", pb.diffusion.interval, false);
    if (pb.running && pb.payoff.has_value_jumps()) parse_fail("payoff: a running reward needs a continuous cost");
    pb.solver = parse_solver(ctx, root["solver"]);
    pb.verify = parse_verify(ctx, root["verify"], pb.diffusion);
    pb.output = parse_output(ctx, root["output"]);
    return pb;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) parse_fail("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Problem load_problem(const std::string& path, const ParameterMap& overrides) {
    return parse_problem(read_text_file(path), overrides);
}

}  // namespace dcstop
