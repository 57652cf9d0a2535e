#include "dcstop/quadrature.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <vector>
#include <sstream>

namespace dcstop {

namespace bq = boost::math::quadrature;

namespace {

double checked(double value, double lo, double hi) {
    if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "non-finite integral over ]" << lo << ", " << hi << "[";
        throw StoppingError(ErrorCode::QuadratureFailure, os.str());
    }
    return value;
}

// Integrand wrapper that maps a non-finite sample to a quadrature failure
// instead of letting it poison the sum silently.
struct Guarded {
    const RealFn* f;
    double operator()(double x) const {
        const double v = (*f)(x);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "integrand not finite at x = " << x;
            throw StoppingError(ErrorCode::QuadratureFailure, os.str());
        }
        return v;
    }
};

// Adaptive bisection on top of the single-panel Kronrod rule. The recursive
// driver shipped with Boost 1.74 compares the unscaled panel error against a
// scaled tolerance, which never terminates on short panels.
struct Panel {
    double value, error, l1;
};

Panel kronrod(const Guarded& g, double a, double b) {
    double err = 0, l1 = 0;
    const double v = bq::gauss_kronrod<double, 31>::integrate(g, a, b, 0, 0.0, &err, &l1);
    return {v, err * 0.5 * (b - a), l1};
}

double adapt(const Guarded& g, double a, double b, const Panel& p, double abs_tol, unsigned depth) {
    const double floor = 64 * std::numeric_limits<double>::epsilon() * p.l1;
    if (depth == 0 || p.error <= std::max(abs_tol, floor)) return p.value;
    const double mid = 0.5 * (a + b);
    const Panel left = kronrod(g, a, mid), right = kronrod(g, mid, b);
    return adapt(g, a, mid, left, 0.5 * abs_tol, depth - 1) + adapt(g, mid, b, right, 0.5 * abs_tol, depth - 1);
}

}  // namespace

double integrate_function(const RealFn& f, double lo, double hi, bool singular_lo,
                          bool singular_hi, const QuadratureOptions& opts) {
    if (!(hi > lo)) return 0.0;
    Guarded g{&f};
    try {
        if (std::isinf(lo) && std::isinf(hi)) {
            thread_local bq::sinh_sinh<double> rule;
            return checked(rule.integrate(g, opts.rel_tol), lo, hi);
        }
        if (std::isinf(lo) || std::isinf(hi)) {
            thread_local bq::exp_sinh<double> rule;
            return checked(rule.integrate(g, lo, hi, opts.rel_tol), lo, hi);
        }
        if (singular_lo || singular_hi) {
            thread_local bq::tanh_sinh<double> rule;
            return checked(rule.integrate(g, lo, hi, opts.rel_tol), lo, hi);
        }
        // positive ranges spanning decades are split geometrically so that
        // power-type integrands are resolved near the small end
        std::vector<double> cuts{lo};
        if (lo > 0 && hi / lo > 100.0) {
            for (double c = lo * 10.0; c < hi / 1.5; c *= 10.0) cuts.push_back(c);
        }
        cuts.push_back(hi);
        std::vector<Panel> panels;
        double l1 = 0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            panels.push_back(kronrod(g, cuts[i], cuts[i + 1]));
            l1 += panels.back().l1;
        }
        double total = 0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            total += adapt(g, cuts[i], cuts[i + 1], panels[i], opts.rel_tol * l1 / static_cast<double>(panels.size()),
                           opts.max_depth);
        }
        return checked(total, lo, hi);
    } catch (const StoppingError&) {
        throw;
    } catch (const std::exception& e) {
        throw StoppingError(ErrorCode::QuadratureFailure, e.what());
    }
}

}  // namespace dcstop
