#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcstop {

enum class ErrorCode {
    InvalidArgument,
    NonPositiveVolatility,
    DiscountBelowFloor,
    IntegrabilityProbeDiverged,
    OdeIntegrationFailed,
    NoDecayingSolutionFound,
    OutOfInterval,
    StaircaseModeRequired,
    QuadratureFailure,
    IdentityMismatch,
    IntegrabilityFailure,
    MoreThanTwoSignChanges,
    MultipleCrossings,
    Unclassifiable,
    NonpositiveA,
    NonpositiveB,
    OrderViolation,
    NoRoot,
    AtomStraddle,
    NoCrossing,
    NegativeCoefficient,
    SingularFitSystem,
    ContinuityViolation,
    UnstableScheme,
    NoConvergence,
    ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonPositiveVolatility: return "NonPositiveVolatility";
        case ErrorCode::DiscountBelowFloor: return "DiscountBelowFloor";
        case ErrorCode::IntegrabilityProbeDiverged: return "IntegrabilityProbeDiverged";
        case ErrorCode::OdeIntegrationFailed: return "OdeIntegrationFailed";
        case ErrorCode::NoDecayingSolutionFound: return "NoDecayingSolutionFound";
        case ErrorCode::OutOfInterval: return "OutOfInterval";
        case ErrorCode::StaircaseModeRequired: return "StaircaseModeRequired";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::IdentityMismatch: return "IdentityMismatch";
        case ErrorCode::IntegrabilityFailure: return "IntegrabilityFailure";
        case ErrorCode::MoreThanTwoSignChanges: return "MoreThanTwoSignChanges";
        case ErrorCode::MultipleCrossings: return "MultipleCrossings";
        case ErrorCode::Unclassifiable: return "Unclassifiable";
        case ErrorCode::NonpositiveA: return "NonpositiveA";
        case ErrorCode::NonpositiveB: return "NonpositiveB";
        case ErrorCode::OrderViolation: return "OrderViolation";
        case ErrorCode::NoRoot: return "NoRoot";
        case ErrorCode::AtomStraddle: return "AtomStraddle";
        case ErrorCode::NoCrossing: return "NoCrossing";
        case ErrorCode::NegativeCoefficient: return "NegativeCoefficient";
        case ErrorCode::SingularFitSystem: return "SingularFitSystem";
        case ErrorCode::ContinuityViolation: return "ContinuityViolation";
        case ErrorCode::UnstableScheme: return "UnstableScheme";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Error raised by every solver stage. The code identifies the failure class;
/// the message carries the diagnostics.
class StoppingError : public std::runtime_error {
public:
    StoppingError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dcstop
