#include "acekit/error.hpp"

namespace acekit {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::Separation: return "Separation";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::EmptyGroup: return "EmptyGroup";
        case ErrorKind::InsufficientGroupSize: return "InsufficientGroupSize";
        case ErrorKind::EmptySubclassArm: return "EmptySubclassArm";
        case ErrorKind::DegeneratePS: return "DegeneratePS";
        case ErrorKind::WrongShape: return "WrongShape";
        case ErrorKind::TooManyCovariates: return "TooManyCovariates";
        case ErrorKind::UnknownScenario: return "UnknownScenario";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::MissingColumn: return "MissingColumn";
        case ErrorKind::AllMissingColumn: return "AllMissingColumn";
        case ErrorKind::MissingData: return "MissingData";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::UnknownScenario:
        case ErrorKind::ConfigError:
            return ErrorCategory::Usage;
        case ErrorKind::RankDeficient:
        case ErrorKind::Separation:
        case ErrorKind::NotPositiveDefinite:
        case ErrorKind::DegeneratePS:
            return ErrorCategory::Numerical;
        default:
            return ErrorCategory::Data;
    }
}

}  // namespace acekit
