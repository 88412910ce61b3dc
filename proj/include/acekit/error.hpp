#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acekit {

enum class ErrorKind {
    DimensionMismatch,
    RankDeficient,
    Separation,
    NotPositiveDefinite,
    DomainError,
    EmptyGroup,
    InsufficientGroupSize,
    EmptySubclassArm,
    DegeneratePS,
    WrongShape,
    TooManyCovariates,
    UnknownScenario,
    ParseError,
    MissingColumn,
    AllMissingColumn,
    MissingData,
    ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Coarse categories used for process exit codes.
enum class ErrorCategory { Usage, Data, Numerical };

ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace acekit
