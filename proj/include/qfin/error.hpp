#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qfin {

enum class ErrorKind {
    Format,
    EmptyInput,
    DuplicateDate,
    EmptySlice,
    Sampling,
    InsufficientData,
    Parameter,
    ZeroRange,
    Input,
    Convergence,
    Numerical,
    Regime,
    Internal,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::DuplicateDate: return "duplicate-date";
    case ErrorKind::EmptySlice: return "empty-slice";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::ZeroRange: return "zero-range";
    case ErrorKind::Input: return "input";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Regime: return "regime";
    case ErrorKind::Internal: return "internal";
    }
    return "unknown";
}

/// Domain error raised by every qfin module. The kind is stable and
/// machine-readable; the message is for humans.
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

} // namespace qfin
