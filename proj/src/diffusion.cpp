#include "dcstop/diffusion.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <sstream>

#include "dcstop/interp.hpp"
#include "dcstop/quadrature.hpp"

namespace dcstop {

std::string to_string(Preset preset) {
    switch (preset) {
        case Preset::BrownianMotion: return "BM";
        case Preset::GeometricBrownianMotion: return "GBM";
        case Preset::OrnsteinUhlenbeck: return "OU";
        case Preset::Cir: return "CIR";
        case Preset::Custom: return "custom";
    }
    return "custom";
}

DiffusionSpec geometric_bm(double drift, double volatility, double rate, Interval window) {
    DiffusionSpec s;
    s.drift = [drift](double x) { return drift * x; };
    s.volatility = [volatility](double x) { return volatility * x; };
    s.discount = [rate](double) { return rate; };
    s.interval = {0.0, kInf};
    s.window = window;
    s.discount_floor = rate;
    s.preset = Preset::GeometricBrownianMotion;
    s.params = {.drift = drift, .volatility = volatility, .rate = rate};
    return s;
}

DiffusionSpec brownian_motion(double drift, double volatility, double rate, Interval window) {
    DiffusionSpec s;
    s.drift = [drift](double) { return drift; };
    s.volatility = [volatility](double) { return volatility; };
    s.discount = [rate](double) { return rate; };
    s.interval = {-kInf, kInf};
    s.window = window;
    s.discount_floor = rate;
    s.preset = Preset::BrownianMotion;
    s.params = {.drift = drift, .volatility = volatility, .rate = rate};
    return s;
}

DiffusionSpec ornstein_uhlenbeck(double mean_reversion, double long_run_mean, double volatility,
                                 double rate, std::optional<Interval> window) {
    DiffusionSpec s;
    s.drift = [mean_reversion, long_run_mean](double x) { return mean_reversion * (long_run_mean - x); };
    s.volatility = [volatility](double) { return volatility; };
    s.discount = [rate](double) { return rate; };
    s.interval = {-kInf, kInf};
    if (window) {
        s.window = *window;
    } else {
        // eight stationary standard deviations either side
        const double sd = volatility / std::sqrt(2.0 * std::max(mean_reversion, 1e-12));
        s.window = {long_run_mean - 8.0 * sd, long_run_mean + 8.0 * sd};
    }
    s.discount_floor = rate;
    s.preset = Preset::OrnsteinUhlenbeck;
    s.params = {.volatility = volatility, .rate = rate, .mean_reversion = mean_reversion,
                .long_run_mean = long_run_mean};
    return s;
}

DiffusionSpec cir(double mean_reversion, double long_run_mean, double volatility, double rate,
                  Interval window) {
    DiffusionSpec s;
    s.drift = [mean_reversion, long_run_mean](double x) { return mean_reversion * (long_run_mean - x); };
    s.volatility = [volatility](double x) { return volatility * std::sqrt(std::max(x, 0.0)); };
    s.discount = [rate](double) { return rate; };
    s.interval = {0.0, kInf};
    s.window = window;
    s.discount_floor = rate;
    s.preset = Preset::Cir;
    s.params = {.volatility = volatility, .rate = rate, .mean_reversion = mean_reversion,
                .long_run_mean = long_run_mean};
    return s;
}

DiffusionSpec custom_diffusion(RealFn drift, RealFn volatility, RealFn discount, Interval interval,
                               Interval window, double discount_floor) {
    DiffusionSpec s;
    s.drift = std::move(drift);
    s.volatility = std::move(volatility);
    s.discount = std::move(discount);
    s.interval = interval;
    s.window = window;
    s.discount_floor = discount_floor;
    return s;
}

namespace {

std::vector<double> probe_grid(const Interval& w, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        xs[static_cast<std::size_t>(i)] = w.log_scaled() ? w.lo * std::pow(w.hi / w.lo, t)
                                                          : w.lo + t * (w.hi - w.lo);
    }
    return xs;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

ValidationReport validate_diffusion(const DiffusionSpec& spec, int probes) {
    ValidationReport report;
    auto fail = [&report](ErrorCode code) {
        if (!report.failure) report.failure = code;
    };
    if (!(spec.window.lo < spec.window.hi) || spec.window.lo < spec.interval.lo ||
        spec.window.hi > spec.interval.hi || !spec.window.finite()) {
        report.checks.push_back({"window", false, "window must be a finite subinterval of the state space"});
        fail(ErrorCode::InvalidArgument);
        return report;
    }
    const auto xs = probe_grid(spec.window, std::max(probes, 3));

    AssumptionCheck vol{"sigma > 0", true, "positive at all probes"};
    for (double x : xs) {
        if (!(spec.sigma2(x) > 0) || !std::isfinite(spec.sigma2(x))) {
            vol = {"sigma > 0", false, "sigma(" + fmt(x) + ") = " + fmt(spec.volatility(x))};
            fail(ErrorCode::NonPositiveVolatility);
            break;
        }
    }
    report.checks.push_back(vol);

    AssumptionCheck disc{"r >= r0 > 0", true, "r0 = " + fmt(spec.discount_floor)};
    if (!(spec.discount_floor > 0)) {
        disc = {"r >= r0 > 0", false, "discount floor r0 = " + fmt(spec.discount_floor) + " is not positive"};
        fail(ErrorCode::DiscountBelowFloor);
    } else {
        for (double x : xs) {
            if (spec.discount(x) < spec.discount_floor * (1 - 1e-12)) {
                disc = {"r >= r0 > 0", false,
                        "r(" + fmt(x) + ") = " + fmt(spec.discount(x)) + " < r0 = " + fmt(spec.discount_floor)};
                fail(ErrorCode::DiscountBelowFloor);
                break;
            }
        }
    }
    report.checks.push_back(disc);

    AssumptionCheck integ{"local integrability of (1+|b|)/sigma^2 and r/sigma^2", true,
                          "finite on every probe panel"};
    if (vol.passed) {
        try {
            for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
                const double a = integrate_function(
                    [&spec](double x) { return (1 + std::abs(spec.drift(x))) / spec.sigma2(x); }, xs[i], xs[i + 1],
                    false, false, {1e-8, 10});
                const double c = integrate_function(
                    [&spec](double x) { return spec.discount(x) / spec.sigma2(x); }, xs[i], xs[i + 1], false,
                    false, {1e-8, 10});
                if (!std::isfinite(a) || !std::isfinite(c)) throw StoppingError(ErrorCode::QuadratureFailure, "");
            }
        } catch (const StoppingError&) {
            integ = {integ.name, false, "quadrature diverged on a probe panel"};
            fail(ErrorCode::IntegrabilityProbeDiverged);
        }
    } else {
        integ = {integ.name, false, "skipped: volatility not positive"};
    }
    report.checks.push_back(integ);

    if (spec.preset == Preset::Custom) {
        report.checks.push_back({"non-explosion", true, "unverified, user-asserted for custom coefficients"});
    } else {
        report.checks.push_back({"non-explosion", true, "known for the " + to_string(spec.preset) + " family"});
    }
    return report;
}

void require_valid(const DiffusionSpec& spec) {
    const auto report = validate_diffusion(spec);
    if (report.ok()) return;
    for (const auto& c : report.checks) {
        if (!c.passed) throw StoppingError(*report.failure, c.name + ": " + c.detail);
    }
    throw StoppingError(*report.failure, "diffusion validation failed");
}

PowerRoots gbm_roots(double drift, double volatility, double rate) {
    const double v2 = volatility * volatility;
    const double c = 0.5 - drift / v2;
    const double d = std::sqrt(c * c + 2.0 * rate / v2);
    return {c - d, c + d};
}

PowerRoots bm_roots(double drift, double volatility, double rate) {
    const double v2 = volatility * volatility;
    const double d = std::sqrt(drift * drift + 2.0 * rate * v2);
    return {(-drift - d) / v2, (-drift + d) / v2};
}

namespace detail {

struct PairImpl {
    virtual ~PairImpl() = default;
    virtual double phi(double x) const = 0;
    virtual double dphi(double x) const = 0;
    virtual double psi(double x) const = 0;
    virtual double dpsi(double x) const = 0;
    virtual double wronskian(double x) const { return phi(x) * dpsi(x) - dphi(x) * psi(x); }
    // tail weights without sigma^2 W cancellation issues
    virtual double cap_phi(double x, double s2) const { return phi(x) / (s2 * wronskian(x)); }
    virtual double cap_psi(double x, double s2) const { return psi(x) / (s2 * wronskian(x)); }
    virtual Interval support() const = 0;
    virtual bool closed_form() const = 0;
};

}  // namespace detail

namespace {

// phi = x^m, psi = x^n
struct PowerPair final : detail::PairImpl {
    double m, n, v2;
    Interval dom;
    PowerPair(PowerRoots r, double vol) : m(r.m), n(r.n), v2(vol * vol), dom{0.0, kInf} {}
    double phi(double x) const override { return std::pow(x, m); }
    double dphi(double x) const override { return m * std::pow(x, m - 1); }
    double psi(double x) const override { return std::pow(x, n); }
    double dpsi(double x) const override { return n * std::pow(x, n - 1); }
    double wronskian(double x) const override { return (n - m) * std::pow(x, m + n - 1); }
    double cap_phi(double x, double) const override { return std::pow(x, -n - 1) / (v2 * (n - m)); }
    double cap_psi(double x, double) const override { return std::pow(x, -m - 1) / (v2 * (n - m)); }
    Interval support() const override { return dom; }
    bool closed_form() const override { return true; }
};

// phi = e^{m x}, psi = e^{n x}
struct ExponentialPair final : detail::PairImpl {
    double m, n, v2;
    ExponentialPair(PowerRoots r, double vol) : m(r.m), n(r.n), v2(vol * vol) {}
    double phi(double x) const override { return std::exp(m * x); }
    double dphi(double x) const override { return m * std::exp(m * x); }
    double psi(double x) const override { return std::exp(n * x); }
    double dpsi(double x) const override { return n * std::exp(n * x); }
    double wronskian(double x) const override { return (n - m) * std::exp((m + n) * x); }
    double cap_phi(double x, double) const override { return std::exp(-n * x) / (v2 * (n - m)); }
    double cap_psi(double x, double) const override { return std::exp(-m * x) / (v2 * (n - m)); }
    Interval support() const override { return {-kInf, kInf}; }
    bool closed_form() const override { return true; }
};

// Solutions stored through s = log f and w = ds/dt on a uniform grid in
// t (t = log x on log-scaled windows, t = x otherwise). w solves a Riccati
// equation, so the tables never overflow.
struct NumericalPair final : detail::PairImpl {
    bool log_var;
    double t0, dt;
    Interval window, extended;
    std::vector<double> t;
    std::array<std::vector<double>, 3> sphi, spsi;  // s, w, w'

    double to_x(double tv) const { return log_var ? std::exp(tv) : tv; }
    double to_t(double x) const { return log_var ? std::log(x) : x; }
    double jac(double x) const { return log_var ? x : 1.0; }

    struct Eval {
        double s, w;
    };
    Eval eval(const std::array<std::vector<double>, 3>& tab, double x) const {
        if (!(x >= extended.lo && x <= extended.hi)) {
            std::ostringstream os;
            os << "x = " << x << " outside the tabulated range [" << extended.lo << ", " << extended.hi << "]";
            throw StoppingError(ErrorCode::OutOfInterval, os.str());
        }
        const double tv = to_t(x);
        const std::size_t k = detail::locate_panel(t, tv);
        const auto h = detail::quintic_hermite(t[k], t[k + 1], tab[0][k], tab[1][k], tab[2][k], tab[0][k + 1],
                                               tab[1][k + 1], tab[2][k + 1], tv);
        return {h.f, h.df};
    }

    double phi(double x) const override { return std::exp(eval(sphi, x).s); }
    double psi(double x) const override { return std::exp(eval(spsi, x).s); }
    double dphi(double x) const override {
        const auto e = eval(sphi, x);
        return e.w / jac(x) * std::exp(e.s);
    }
    double dpsi(double x) const override {
        const auto e = eval(spsi, x);
        return e.w / jac(x) * std::exp(e.s);
    }
    double wronskian(double x) const override {
        const auto a = eval(sphi, x), b = eval(spsi, x);
        return std::exp(a.s + b.s) * (b.w - a.w) / jac(x);
    }
    double cap_phi(double x, double s2) const override {
        const auto a = eval(sphi, x), b = eval(spsi, x);
        return std::exp(-b.s) * jac(x) / (s2 * (b.w - a.w));
    }
    double cap_psi(double x, double s2) const override {
        const auto a = eval(sphi, x), b = eval(spsi, x);
        return std::exp(-a.s) * jac(x) / (s2 * (b.w - a.w));
    }
    Interval support() const override { return window; }
    bool closed_form() const override { return false; }
};

using State = std::array<double, 2>;

std::shared_ptr<const detail::PairImpl> build_numerical(const DiffusionSpec& spec, int nodes) {
    auto pair = std::make_shared<NumericalPair>();
    const Interval w = spec.window;
    pair->log_var = w.log_scaled() && spec.interval.lo >= 0.0;
    // Extend the table outward until the Green weights have decayed by about
    // e^-60 (frozen-coefficient estimate) or a hard cap is reached. The tails
    // of the Green integrals live out there.
    const double cap = pair->log_var ? std::log(1e12) : 10.0 * (w.hi - w.lo);
    auto reach = [&](double from, double dir) {
        const double step = cap / 400.0;
        double t = pair->log_var ? std::log(from) : from, acc = 0, moved = 0;
        while (moved < cap && acc < 60.0) {
            const double x = pair->log_var ? std::exp(t + dir * step) : t + dir * step;
            if (!spec.interval.contains(x)) break;
            const double s2 = spec.sigma2(x), b = spec.drift(x), r = spec.discount(x);
            if (!(s2 > 0) || !std::isfinite(s2)) break;
            const double J = pair->log_var ? x : 1.0;
            acc += step * J * std::sqrt(b * b + 2.0 * r * s2) / s2;
            t += dir * step;
            moved += step;
        }
        return pair->log_var ? std::exp(t) : t;
    };
    Interval ext{reach(w.lo, -1.0), reach(w.hi, 1.0)};
    // integrals stop a little inside the table, where both solutions are accurate
    Interval sup = pair->log_var ? Interval{std::min(ext.lo * 10.0, w.lo), std::max(ext.hi / 10.0, w.hi)}
                                 : Interval{std::min(ext.lo + 0.01 * (w.hi - w.lo), w.lo),
                                            std::max(ext.hi - 0.01 * (w.hi - w.lo), w.hi)};
    pair->window = sup;
    pair->extended = ext;
    const double ta = pair->to_t(ext.lo), tb = pair->to_t(ext.hi);
    const auto n = static_cast<std::size_t>(std::max(nodes, 65));
    pair->t.resize(n);
    for (std::size_t i = 0; i < n; ++i) pair->t[i] = ta + (tb - ta) * static_cast<double>(i) / (n - 1);
    pair->t0 = ta;
    pair->dt = (tb - ta) / (n - 1);

    const bool lv = pair->log_var;
    auto coeffs = [&spec, lv](double tv, double& x, double& J, double& dJ) {
        x = lv ? std::exp(tv) : tv;
        J = lv ? x : 1.0;
        dJ = lv ? 1.0 : 0.0;  // (dJ/dt) / J
    };
    auto wprime = [&](double tv, double wv) {
        double x, J, dJ;
        coeffs(tv, x, J, dJ);
        const double s2 = spec.sigma2(x);
        return dJ * wv + 2.0 * J * J * spec.discount(x) / s2 - 2.0 * J * spec.drift(x) * wv / s2 - wv * wv;
    };
    auto rhs = [&](const State& y, State& dy, double tv) {
        dy[0] = y[1];
        dy[1] = wprime(tv, y[1]);
    };
    // frozen-coefficient root in the t variable, used as starting slope
    auto frozen = [&](double tv, bool increasing) {
        double x, J, dJ;
        coeffs(tv, x, J, dJ);
        const double s2 = spec.sigma2(x), b = spec.drift(x), r = spec.discount(x);
        const double d = std::sqrt(b * b + 2.0 * r * s2);
        return J * (increasing ? (-b + d) / s2 : (-b - d) / s2);
    };

    namespace ode = boost::numeric::odeint;
    auto run = [&](bool increasing, std::array<std::vector<double>, 3>& tab) {
        for (auto& v : tab) v.assign(n, 0.0);
        // psi is dominant toward beta, so integrate it left to right; phi the other way
        State y{0.0, frozen(increasing ? ta : tb, increasing)};
        std::vector<double> times(pair->t);
        if (!increasing) std::reverse(times.begin(), times.end());
        auto observer = [&](const State& s, double tv) {
            const auto k = static_cast<std::size_t>(std::llround((tv - ta) / pair->dt));
            if (!std::isfinite(s[0]) || !std::isfinite(s[1])) {
                throw StoppingError(ErrorCode::OdeIntegrationFailed, "non-finite state during integration");
            }
            tab[0][k] = s[0];
            tab[1][k] = s[1];
            tab[2][k] = wprime(tv, s[1]);
        };
        const double step = (increasing ? 1.0 : -1.0) * pair->dt * 0.1;
        try {
            ode::integrate_times(ode::make_dense_output(1e-12, 1e-11, ode::runge_kutta_dopri5<State>()), rhs, y,
                                 times.begin(), times.end(), step, observer);
        } catch (const StoppingError&) {
            throw;
        } catch (const std::exception& e) {
            throw StoppingError(ErrorCode::OdeIntegrationFailed, e.what());
        }
    };
    run(false, pair->sphi);
    run(true, pair->spsi);

    // normalize at the window midpoint
    const double mid = w.midpoint();
    const double sp = pair->eval(pair->sphi, mid).s, sq = pair->eval(pair->spsi, mid).s;
    for (std::size_t i = 0; i < n; ++i) {
        pair->sphi[0][i] -= sp;
        pair->spsi[0][i] -= sq;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x = pair->to_x(pair->t[i]);
        if (x < w.lo || x > w.hi) continue;
        if (!(pair->sphi[1][i] < 0.0) || !(pair->spsi[1][i] > 0.0)) {
            std::ostringstream os;
            os << "monotonicity lost at x = " << x << " (phi slope " << pair->sphi[1][i] << ", psi slope "
               << pair->spsi[1][i] << ")";
            throw StoppingError(ErrorCode::NoDecayingSolutionFound, os.str());
        }
    }
    return pair;
}

}  // namespace

FundamentalPair::FundamentalPair(std::shared_ptr<const detail::PairImpl> impl, DiffusionSpec spec, double kappa)
    : impl_(std::move(impl)), spec_(std::move(spec)), kappa_(kappa) {}

double FundamentalPair::phi(double x) const { return impl_->phi(x); }
double FundamentalPair::dphi(double x) const { return impl_->dphi(x); }
double FundamentalPair::psi(double x) const { return impl_->psi(x); }
double FundamentalPair::dpsi(double x) const { return impl_->dpsi(x); }
double FundamentalPair::wronskian(double x) const { return impl_->wronskian(x); }
double FundamentalPair::cap_phi(double x) const { return impl_->cap_phi(x, spec_.sigma2(x)); }
double FundamentalPair::cap_psi(double x) const { return impl_->cap_psi(x, spec_.sigma2(x)); }
Interval FundamentalPair::support() const { return impl_->support(); }
bool FundamentalPair::closed_form() const { return impl_->closed_form(); }

FundamentalPair fundamental_solutions(const DiffusionSpec& spec) {
    require_valid(spec);
    const double kappa = calibrate_green_norm();
    const auto& p = spec.params;
    if (spec.preset == Preset::GeometricBrownianMotion) {
        return {std::make_shared<PowerPair>(gbm_roots(p.drift, p.volatility, p.rate), p.volatility), spec, kappa};
    }
    if (spec.preset == Preset::BrownianMotion) {
        return {std::make_shared<ExponentialPair>(bm_roots(p.drift, p.volatility, p.rate), p.volatility), spec,
                kappa};
    }
    return {build_numerical(spec, 4097), spec, kappa};
}

FundamentalPair numerical_fundamental_solutions(const DiffusionSpec& spec, int nodes) {
    require_valid(spec);
    return {build_numerical(spec, nodes), spec, calibrate_green_norm()};
}

double hitting_factor(const FundamentalPair& pair, double x, double z) {
    if (x == z) return 1.0;
    return x < z ? pair.psi(x) / pair.psi(z) : pair.phi(x) / pair.phi(z);
}

double calibrate_green_norm() {
    static const double kappa = [] {
        // g(x) = x under GBM(b, s, r): L g = (b - r) x, no atoms
        const double b = 0.02, s = 0.3, r = 0.05;
        const PowerPair p(gbm_roots(b, s, r), s);
        auto rep = [&](double x, double k) {
            const double left = integrate_function(
                [&](double y) { return p.cap_psi(y, 0) * (b - r) * y; }, 0.0, x, true, false);
            const double right = integrate_function(
                [&](double y) { return p.cap_phi(y, 0) * (b - r) * y; }, x, kInf);
            return -k * (p.phi(x) * left + p.psi(x) * right);
        };
        double best = 1.0, err_best = kInf;
        for (double k : {1.0, 2.0}) {
            double err = 0;
            for (double x : {0.5, 1.0, 3.0}) err = std::max(err, std::abs(rep(x, k) - x) / x);
            if (err < err_best) {
                err_best = err;
                best = k;
            }
        }
        return best;
    }();
    return kappa;
}

}  // namespace dcstop
