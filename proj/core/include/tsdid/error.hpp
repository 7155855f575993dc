#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsdid {

enum class ErrorCode {
    // Input / data errors.
    Parse,
    EmptyFile,
    MissingColumn,
    DuplicateUnitTime,
    NonNumericOutcome,
    NonIntegerTime,
    InconsistentGroup,
    InvalidWeight,
    InvalidShares,
    InvalidArgument,
    // Estimation errors.
    NoUntreatedObservations,
    NoTreatedObservations,
    UnseenLevel,
    DidNotConverge,
    SingularCovariates,
    NoRowsSelected,
    AllColumnsCollinear,
    DegenerateDesign,
    SingularSecondStageGram,
    SingularFirstStageGram,
    TooManyFailedReplicates,
};

/// Stable machine-readable name, e.g. "E_UNSEEN_LEVEL".
[[nodiscard]] std::string_view error_code_name(ErrorCode code) noexcept;

/// True for errors caused by malformed or invalid input data (as opposed to
/// an estimation problem on well-formed data).
[[nodiscard]] bool is_data_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace tsdid
