#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mammo {

enum class ErrorCode {
    MissingView,
    BadPolygon,
    DuplicateCaseId,
    FrameMismatch,
    RangeExceeded,
    NoForeground,
    MissingNode,
    ValueOutOfRange,
    UnknownView,
    IncompleteBundle,
    DegenerateLabels,
    InvalidCounts,
    EmptyGeometry,
    OverlapWithAutoAccept,
    InconsistentCaseSets,
    BadItemCount,
    BadItemValue,
    MissingAssessment,
    IoFailure,
    ParseError,
    UnknownCase,
    UnknownReviewer,
    ValidationFailed,
    StoreNotFound,
    PortInUse,
    Usage,
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingView: return "MissingView";
    case ErrorCode::BadPolygon: return "BadPolygon";
    case ErrorCode::DuplicateCaseId: return "DuplicateCaseId";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::RangeExceeded: return "RangeExceeded";
    case ErrorCode::NoForeground: return "NoForeground";
    case ErrorCode::MissingNode: return "MissingNode";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::UnknownView: return "UnknownView";
    case ErrorCode::IncompleteBundle: return "IncompleteBundle";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::EmptyGeometry: return "EmptyGeometry";
    case ErrorCode::OverlapWithAutoAccept: return "OverlapWithAutoAccept";
    case ErrorCode::InconsistentCaseSets: return "InconsistentCaseSets";
    case ErrorCode::BadItemCount: return "BadItemCount";
    case ErrorCode::BadItemValue: return "BadItemValue";
    case ErrorCode::MissingAssessment: return "MissingAssessment";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownCase: return "UnknownCase";
    case ErrorCode::UnknownReviewer: return "UnknownReviewer";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::StoreNotFound: return "StoreNotFound";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

/// All library failures are reported through this exception; `code()` is the
/// stable, machine-checkable part and `what()` carries the human context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace mammo
