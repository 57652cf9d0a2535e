#pragma once

#include <string>
#include <vector>

#include "dcstop/diffusion.hpp"

namespace dcstop {

enum class CaseLabel { I, II, III, IV, V, VI, Composite };

std::string to_string(CaseLabel label);

/// v = A phi + B psi on ]lo, hi[.
struct ContinuationInterval {
    double lo;
    double hi;
    double A;
    double B;
};

/// Closed (in the domain) stopping component [lo, hi]; lo == hi for a point.
/// An end equal to the domain end means the component runs up to it.
struct StoppingComponent {
    double lo;
    double hi;
};

struct RegionPartition {
    Interval domain;
    std::vector<ContinuationInterval> continuation;
    std::vector<StoppingComponent> stopping;

    bool in_stopping(double x) const;
    /// Continuation component containing x, or nullptr.
    const ContinuationInterval* component(double x) const;
    /// Finite boundary points of the continuation region, sorted.
    std::vector<double> boundaries() const;
};

}  // namespace dcstop
