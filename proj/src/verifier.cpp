#include "dcstop/verifier.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <boost/random/normal_distribution.hpp>

namespace dcstop {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}

// Paths live in a working coordinate: log x for exact GBM steps, x otherwise.
struct Model {
    const DiffusionSpec* spec;
    Scheme scheme;
    double dt;
    double sqdt;
    double log_drift = 0;  // b - sigma^2/2 for exact GBM
    double log_vol = 0;
    std::optional<double> rate;  // constant discount of the presets

    Model(const DiffusionSpec& s, const SimConfig& cfg)
        : spec(&s), scheme(cfg.scheme), dt(cfg.dt), sqdt(std::sqrt(cfg.dt)) {
        if (!(cfg.dt > 0)) throw StoppingError(ErrorCode::InvalidArgument, "time step must be positive");
        if (scheme == Scheme::ExactGBM) {
            if (s.preset != Preset::GeometricBrownianMotion) {
                throw StoppingError(ErrorCode::InvalidArgument, "exact stepping needs a GBM preset");
            }
            log_vol = s.params.volatility;
            log_drift = s.params.drift - 0.5 * log_vol * log_vol;
        }
        if (s.preset != Preset::Custom) rate = s.params.rate;
    }

    bool logs() const { return scheme == Scheme::ExactGBM; }
    double to_c(double x) const {
        if (!logs()) return x;
        return x <= 0 ? -kInf : (std::isinf(x) ? kInf : std::log(x));
    }
    double to_x(double c) const { return logs() ? std::exp(c) : c; }

    double step(double c, double z) const {
        if (logs()) return c + log_drift * dt + log_vol * sqdt * z;
        return c + spec->drift(c) * dt + spec->volatility(c) * sqdt * z;
    }
    double variance_rate(double c) const { return logs() ? log_vol * log_vol : spec->sigma2(c); }
    double discount_step(double x0, double x1) const {
        return rate ? *rate * dt : 0.5 * (spec->discount(x0) + spec->discount(x1)) * dt;
    }

    // Probability that the bridge from c0 to c1 touched `level`, both ends
    // strictly on one side of it.
    double bridge(double c0, double c1, double level) const {
        const double e = 2 * (c0 - level) * (c1 - level) / (variance_rate(c0) * dt);
        return e > 60 ? 0.0 : std::exp(-e);
    }
};

struct Exit {
    bool hit = false;
    double level = 0;
    double discount = 0;
};

struct PathRecord {
    Exit inner;
    Exit outer;
    double accumulated = 0;
    long steps = 0;
};

struct AccumulationTerms {
    const SignedMeasure* mu = nullptr;
    double h = 0.01;

    double density(double x) const { return mu ? mu->density(x) : 0.0; }
    double atoms(double x) const {
        if (!mu) return 0.0;
        double s = 0;
        for (const auto& a : mu->atoms()) {
            if (std::abs(x - a.location) < h) s += a.weight / (2 * h);
        }
        return s;
    }
};

struct Band {
    double lo, hi;      // in x
    double clo, chi;    // in the working coordinate
    bool test_lo, test_hi;  // edge is a stopping level inside the domain
};

Band make_band(const Model& m, Interval b) {
    const Interval dom = m.spec->interval;
    return {b.lo, b.hi, m.to_c(b.lo), m.to_c(b.hi), b.lo > dom.lo, b.hi < dom.hi};
}

// One path until it leaves `outer`, noting the first exit from `inner` on the
// way. With nested == false only `outer` matters.
PathRecord run_path(const Model& m, double x0, const Band& inner, const Band& outer, bool nested, long max_steps,
                    std::mt19937_64& eng, double sign, const AccumulationTerms& acc) {
    const Interval dom = m.spec->interval;
    const Interval cdom{m.to_c(dom.lo), m.to_c(dom.hi)};
    boost::random::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    PathRecord rec;
    bool phase2 = !nested;
    double c = m.to_c(x0), lam = 0;

    // crossed edge of the band, in x
    auto crossing = [&](const Band& band, double ca, double cb, double u) -> std::optional<double> {
        if (band.test_lo && cb <= band.clo) return band.lo;
        if (band.test_hi && cb >= band.chi) return band.hi;
        const double p_lo = band.test_lo ? m.bridge(ca, cb, band.clo) : 0.0;
        const double p_hi = band.test_hi ? m.bridge(ca, cb, band.chi) : 0.0;
        if (u < p_lo) return band.lo;
        if (u < p_lo + p_hi) return band.hi;
        return std::nullopt;
    };

    for (long k = 0; k < max_steps; ++k) {
        rec.steps = k + 1;
        const double z = sign * normal(eng);
        const double u = uniform(eng);
        const double c1 = m.step(c, z);
        const Band& band = phase2 ? outer : inner;
        const auto level = std::isfinite(c1) ? crossing(band, c, c1, u) : std::optional<double>{};
        if (!level && !(c1 > cdom.lo && c1 < cdom.hi)) {
            throw StoppingError(ErrorCode::UnstableScheme,
                                "path left the domain from x = " + fmt(m.to_x(c)) + " (step " + std::to_string(k) + ")");
        }
        const double x = acc.mu ? m.to_x(c) : 0.0;
        if (level) {
            const double lam_exit = lam + m.discount_step(m.to_x(c), *level);
            const double disc = std::exp(-lam_exit);
            if (phase2) {
                if (acc.mu) {
                    rec.accumulated += 0.5 * m.dt * (std::exp(-lam) * acc.density(x) + disc * acc.density(*level)) +
                                       m.dt * std::exp(-lam) * acc.atoms(x);
                }
                rec.outer = {true, *level, disc};
                return rec;
            }
            rec.inner = {true, *level, disc};
            phase2 = true;
            if (*level == outer.lo || *level == outer.hi) {
                rec.outer = rec.inner;
                return rec;
            }
            if ((outer.test_lo && c1 <= outer.clo) || (outer.test_hi && c1 >= outer.chi)) {
                rec.outer = {true, c1 <= outer.clo ? outer.lo : outer.hi, disc};
                return rec;
            }
            lam = lam_exit;
            c = c1;
            continue;
        }
        const double lam1 = lam + m.discount_step(m.to_x(c), m.to_x(c1));
        if (phase2 && nested) {
            const double x1 = m.to_x(c1);
            rec.accumulated += 0.5 * m.dt * (std::exp(-lam) * acc.density(x) + std::exp(-lam1) * acc.density(x1)) +
                               m.dt * std::exp(-lam) * acc.atoms(x);
        }
        c = c1;
        lam = lam1;
    }
    return rec;
}

struct SampleValue {
    double value = 0;
    std::size_t unstopped = 0;
    std::array<double, 3> parts{};  // side sums reported with the mean
};

struct Moments {
    double sum = 0;
    double sumsq = 0;
    std::size_t n = 0;
    std::size_t unstopped = 0;
    std::array<double, 3> parts{};
};

// Runs `pairs` independent samples (each an antithetic pair or one path),
// chunked over threads. sample(engine, index) returns the sample value and
// whether any path failed to stop.
template <class Sample>
std::vector<Moments> run_chunks(std::size_t samples, const SimConfig& cfg, Sample sample) {
    constexpr std::size_t kChunk = 1024;
    const std::size_t chunks = (samples + kChunk - 1) / kChunk;
    std::vector<Moments> out(chunks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
            try {
                Moments m;
                const std::size_t end = std::min(samples, (c + 1) * kChunk);
                std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                                  static_cast<std::uint32_t>(c)};
                std::mt19937_64 eng(seq);
                for (std::size_t i = c * kChunk; i < end; ++i) {
                    const SampleValue v = sample(eng);
                    m.sum += v.value;
                    m.sumsq += v.value * v.value;
                    ++m.n;
                    m.unstopped += v.unstopped;
                    for (std::size_t k = 0; k < v.parts.size(); ++k) m.parts[k] += v.parts[k];
                }
                out[c] = m;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = chunks;
            }
        }
    };
    unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, chunks));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

// Pairwise reduction keeps the sum independent of thread scheduling.
Moments reduce(std::span<const Moments> parts) {
    if (parts.empty()) return {};
    if (parts.size() == 1) return parts[0];
    const std::size_t half = parts.size() / 2;
    const Moments a = reduce(parts.first(half)), b = reduce(parts.subspan(half));
    Moments m{a.sum + b.sum, a.sumsq + b.sumsq, a.n + b.n, a.unstopped + b.unstopped, {}};
    for (std::size_t k = 0; k < m.parts.size(); ++k) m.parts[k] = a.parts[k] + b.parts[k];
    return m;
}

double horizon_of(const DiffusionSpec& spec, const SimConfig& cfg) {
    if (cfg.horizon > 0) return cfg.horizon;
    return std::log(1.0 / cfg.discount_cap) / spec.discount_floor;
}

}  // namespace

SimConfig default_sim_config(const DiffusionSpec& spec) {
    SimConfig cfg;
    if (spec.preset == Preset::GeometricBrownianMotion) {
        cfg.scheme = Scheme::ExactGBM;
        cfg.dt = 0.02;
    }
    return cfg;
}

EstimateCI estimate_value(const DiffusionSpec& spec, const PayoffDC& g, const RegionPartition& region, double x0,
                          const SimConfig& cfg) {
    if (!spec.interval.contains(x0)) throw StoppingError(ErrorCode::OutOfInterval, "x0 = " + fmt(x0));
    const ContinuationInterval* comp = region.component(x0);
    EstimateCI est;
    if (!comp) {
        est.mean = g(x0);
        est.paths_used = cfg.paths;
        return est;
    }
    const Interval edges{comp->lo, comp->hi};
    const bool stops = edges.lo > spec.interval.lo || edges.hi < spec.interval.hi;
    if (!stops) {
        est.paths_used = cfg.paths;
        return est;
    }
    const Model model(spec, cfg);
    const Band band = make_band(model, edges);
    const double T = horizon_of(spec, cfg);
    const long max_steps = static_cast<long>(std::ceil(T / cfg.dt));
    const AccumulationTerms none;
    auto value_of = [&](const PathRecord& r) { return r.outer.hit ? r.outer.discount * g(r.outer.level) : 0.0; };
    const std::size_t samples = cfg.antithetic ? (cfg.paths + 1) / 2 : cfg.paths;
    const auto parts = run_chunks(samples, cfg, [&](std::mt19937_64& eng) {
        if (!cfg.antithetic) {
            const PathRecord a = run_path(model, x0, band, band, false, max_steps, eng, 1.0, none);
            return SampleValue{value_of(a), !a.outer.hit, {}};
        }
        // the twin replays the same draws with mirrored normals; the stream
        // then resumes after the longer of the two
        std::mt19937_64 twin = eng;
        const PathRecord a = run_path(model, x0, band, band, false, max_steps, eng, 1.0, none);
        const PathRecord b = run_path(model, x0, band, band, false, max_steps, twin, -1.0, none);
        if (b.steps > a.steps) eng = twin;
        return SampleValue{0.5 * (value_of(a) + value_of(b)), std::size_t{!a.outer.hit} + !b.outer.hit, {}};
    });
    const Moments m = reduce(parts);
    const double n = static_cast<double>(m.n);
    est.mean = m.sum / n;
    const double var = std::max(0.0, (m.sumsq - n * est.mean * est.mean) / std::max(1.0, n - 1));
    est.std_error = std::sqrt(var / n);
    est.paths_used = cfg.antithetic ? 2 * m.n : m.n;
    est.unstopped_fraction = static_cast<double>(m.unstopped) / static_cast<double>(est.paths_used);
    double gmax = 0;
    for (double e : {edges.lo, edges.hi}) {
        if (spec.interval.contains(e)) gmax = std::max(gmax, std::abs(g(e)));
    }
    est.truncation_bias_bound = gmax * std::exp(-spec.discount_floor * T);
    return est;
}

EstimateCI estimate_hitting_factor(const DiffusionSpec& spec, double x, double z, const SimConfig& cfg) {
    const Interval dom = spec.interval;
    const PayoffDC one({}, {constant_piece(1.0)});
    RegionPartition region{dom, {}, {}};
    if (x < z) {
        region.continuation.push_back({dom.lo, z, 0, 0});
        region.stopping.push_back({z, dom.hi});
    } else if (x > z) {
        region.continuation.push_back({z, dom.hi, 0, 0});
        region.stopping.push_back({dom.lo, z});
    } else {
        region.stopping.push_back({dom.lo, dom.hi});
    }
    return estimate_value(spec, one, region, x, cfg);
}

RegionPartition move_boundary(const RegionPartition& region, double from, double to) {
    RegionPartition out = region;
    for (auto& c : out.continuation) {
        if (c.lo == from) c.lo = to;
        if (c.hi == from) c.hi = to;
        if (!(c.lo < c.hi)) {
            throw StoppingError(ErrorCode::InvalidArgument, "moving " + fmt(from) + " to " + fmt(to) + " empties a component");
        }
    }
    for (auto& s : out.stopping) {
        if (s.lo == from) s.lo = to;
        if (s.hi == from) s.hi = to;
    }
    return out;
}

namespace {
/// a, b, c, ... in increasing order, then y<i> past z.
std::string boundary_name(std::size_t i) {
    return i < 26 ? std::string(1, static_cast<char>('a' + i)) : "y" + std::to_string(i);
}
}  // namespace

std::vector<PerturbationRow> perturbation_test(const DiffusionSpec& spec, const PayoffDC& g,
                                               const RegionPartition& region, double x0,
                                               const std::vector<double>& eps, const SimConfig& cfg) {
    const auto bounds = region.boundaries();
    std::vector<PerturbationRow> rows;
    rows.push_back({"optimal", bounds, estimate_value(spec, g, region, x0, cfg)});
    for (double e : eps) {
        if (e == 0) continue;
        for (double f : {1 + e, 1 - e}) {
            const std::string tag = (f > 1 ? "*(1+" : "*(1-") + fmt(e) + ")";
            for (std::size_t i = 0; i < bounds.size(); ++i) {
                auto moved = bounds;
                moved[i] *= f;
                rows.push_back({boundary_name(i) + tag, moved,
                                estimate_value(spec, g, move_boundary(region, bounds[i], moved[i]), x0, cfg)});
            }
            if (bounds.size() > 1) {
                RegionPartition all = region;
                auto moved = bounds;
                // move outward-first so components never empty on the way
                std::vector<std::size_t> order(bounds.size());
                std::iota(order.begin(), order.end(), 0);
                if (f > 1) std::reverse(order.begin(), order.end());
                for (std::size_t i : order) {
                    moved[i] = bounds[i] * f;
                    all = move_boundary(all, bounds[i], moved[i]);
                }
                rows.push_back({"all" + tag, moved, estimate_value(spec, g, all, x0, cfg)});
            }
        }
    }
    return rows;
}

DynkinResult dynkin_check(const DiffusionSpec& spec, const PayoffDC& g, const SignedMeasure& mu, double x0,
                          Interval inner, Interval outer, const SimConfig& cfg, double h) {
    if (!(outer.lo <= inner.lo && inner.lo < x0 && x0 < inner.hi && inner.hi <= outer.hi)) {
        throw StoppingError(ErrorCode::InvalidArgument, "need outer.lo <= inner.lo < x0 < inner.hi <= outer.hi");
    }
    const Model model(spec, cfg);
    const long max_steps = static_cast<long>(std::ceil(horizon_of(spec, cfg) / cfg.dt));
    const AccumulationTerms acc{&mu, h};
    SimConfig single = cfg;
    single.antithetic = false;
    const auto parts = run_chunks(cfg.paths, single, [&](std::mt19937_64& eng) {
        const PathRecord r =
            run_path(model, x0, make_band(model, inner), make_band(model, outer), true, max_steps, eng, 1.0, acc);
        const double o = r.outer.hit ? r.outer.discount * g(r.outer.level) : 0.0;
        const double i = r.inner.hit ? r.inner.discount * g(r.inner.level) : 0.0;
        return SampleValue{o - i - r.accumulated, !r.outer.hit, {o, i, r.accumulated}};
    });
    const Moments m = reduce(parts);
    const double n = static_cast<double>(m.n);
    DynkinResult out;
    out.residual = m.sum / n;
    out.std_error = std::sqrt(std::max(0.0, (m.sumsq - n * out.residual * out.residual) / std::max(1.0, n - 1)) / n);
    out.outer = m.parts[0] / n;
    out.inner = m.parts[1] / n;
    out.accumulated = m.parts[2] / n;
    out.paths_used = m.n;
    return out;
}

std::vector<double> PsorResult::boundaries() const {
    std::vector<double> out;
    auto cont = [this](std::size_t i) { return v[i] - g[i] > 1e-8 * (1 + std::abs(g[i])); };
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (cont(i) != cont(i - 1)) out.push_back(cont(i) ? x[i - 1] : x[i]);
    }
    return out;
}

PsorResult psor_oracle(const DiffusionSpec& spec, const PayoffDC& g, const PsorGrid& grid) {
    const int n = grid.nodes;
    if (n < 3 || !(grid.lo < grid.hi) || !spec.interval.contains(grid.lo) || !spec.interval.contains(grid.hi)) {
        throw StoppingError(ErrorCode::InvalidArgument, "PSOR grid must have 3+ nodes inside the domain");
    }
    PsorResult res;
    res.x.resize(n);
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        res.x[i] = grid.log_spaced ? grid.lo * std::pow(grid.hi / grid.lo, t) : grid.lo + t * (grid.hi - grid.lo);
    }
    res.g.resize(n);
    for (int i = 0; i < n; ++i) res.g[i] = g(res.x[i]);

    // L v_i = l v_{i-1} + d v_i + u v_{i+1}; central drift unless it breaks
    // the sign pattern, then upwind
    std::vector<double> l(n), d(n), u(n);
    for (int i = 1; i < n - 1; ++i) {
        const double x = res.x[i], hm = x - res.x[i - 1], hp = res.x[i + 1] - x;
        const double a = 0.5 * spec.sigma2(x), b = spec.drift(x), r = spec.discount(x);
        double lc = a * 2 / (hm * (hm + hp)) - b * hp / (hm * (hm + hp));
        double uc = a * 2 / (hp * (hm + hp)) + b * hm / (hp * (hm + hp));
        double dc = -a * 2 / (hm * hp) + b * (hp - hm) / (hm * hp) - r;
        if (lc < 0 || uc < 0) {
            lc = a * 2 / (hm * (hm + hp)) + (b < 0 ? -b / hm : 0.0);
            uc = a * 2 / (hp * (hm + hp)) + (b > 0 ? b / hp : 0.0);
            dc = -a * 2 / (hm * hp) - std::abs(b) * (b > 0 ? 1 / hp : 1 / hm) - r;
        }
        l[i] = lc;
        u[i] = uc;
        d[i] = dc;
    }
    const double omega = grid.omega > 0 ? grid.omega : 2.0 / (1.0 + std::sin(M_PI / n));
    res.v = res.g;
    double change = 0;
    int sweep = 0;
    for (; sweep < grid.max_sweeps; ++sweep) {
        change = 0;
        for (int i = 1; i < n - 1; ++i) {
            const double gs = (l[i] * res.v[i - 1] + u[i] * res.v[i + 1]) / -d[i];
            const double next = std::max(res.g[i], res.v[i] + omega * (gs - res.v[i]));
            change = std::max(change, std::abs(next - res.v[i]) / (1 + std::abs(next)));
            res.v[i] = next;
        }
        if (change < grid.tol) break;
    }
    res.sweeps = sweep;
    double resid = 0;
    for (int i = 1; i < n - 1; ++i) {
        const double lv = (l[i] * res.v[i - 1] + d[i] * res.v[i] + u[i] * res.v[i + 1]) / -d[i];
        resid = std::max(resid, std::abs(std::min(-lv, res.v[i] - res.g[i])) / (1 + std::abs(res.g[i])));
    }
    res.residual = resid;
    if (change >= grid.tol) {
        throw StoppingError(ErrorCode::NoConvergence, "PSOR did not settle in " + std::to_string(grid.max_sweeps) +
                                                          " sweeps (last change " + fmt(change) + ")");
    }
    return res;
}

}  // namespace dcstop
