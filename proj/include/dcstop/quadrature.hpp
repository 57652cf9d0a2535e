#pragma once

#include "dcstop/diffusion.hpp"

namespace dcstop {

struct QuadratureOptions {
    double rel_tol = 1e-12;
    unsigned max_depth = 18;
};

/// Integral of f over ]lo, hi[. Infinite ends use exp-sinh or sinh-sinh, ends
/// flagged as singular use tanh-sinh, everything else adaptive Gauss-Kronrod.
/// Throws QuadratureFailure when the result is not finite.
double integrate_function(const RealFn& f, double lo, double hi, bool singular_lo = false,
                          bool singular_hi = false, const QuadratureOptions& opts = {});

}  // namespace dcstop
