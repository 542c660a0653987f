#pragma once

#include <stdexcept>
#include <string>

namespace qengine {

enum class ErrorCode {
    InvalidDimension,
    Layout,
    UnsupportedKind,
    InvalidParameter,
    InvalidState,
    IntegrationDiverged,
    Truncation,
    IllPosedFit,
    IncompleteRecord,
    Config,
    Parse,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::InvalidDimension: return "invalid-dimension";
    case ErrorCode::Layout: return "layout";
    case ErrorCode::UnsupportedKind: return "unsupported-kind";
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::InvalidState: return "invalid-state";
    case ErrorCode::IntegrationDiverged: return "integration-diverged";
    case ErrorCode::Truncation: return "truncation";
    case ErrorCode::IllPosedFit: return "ill-posed-fit";
    case ErrorCode::IncompleteRecord: return "incomplete-record";
    case ErrorCode::Config: return "config";
    case ErrorCode::Parse: return "parse";
    }
    return "unknown";
}

/// Single exception type for the library; `code()` tells callers which contract was broken.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace qengine
