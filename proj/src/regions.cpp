#include "dcstop/regions.hpp"

#include <algorithm>
#include <cmath>

namespace dcstop {

std::string to_string(CaseLabel label) {
    switch (label) {
        case CaseLabel::I: return "I";
        case CaseLabel::II: return "II";
        case CaseLabel::III: return "III";
        case CaseLabel::IV: return "IV";
        case CaseLabel::V: return "V";
        case CaseLabel::VI: return "VI";
        case CaseLabel::Composite: return "composite";
    }
    return "?";
}

bool RegionPartition::in_stopping(double x) const {
    return std::any_of(stopping.begin(), stopping.end(), [x](const auto& s) { return x >= s.lo && x <= s.hi; });
}

const ContinuationInterval* RegionPartition::component(double x) const {
    for (const auto& c : continuation) {
        if (x > c.lo && x < c.hi) return &c;
    }
    return nullptr;
}

std::vector<double> RegionPartition::boundaries() const {
    std::vector<double> out;
    for (const auto& c : continuation) {
        if (c.lo > domain.lo && std::isfinite(c.lo)) out.push_back(c.lo);
        if (c.hi < domain.hi && std::isfinite(c.hi)) out.push_back(c.hi);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace dcstop
