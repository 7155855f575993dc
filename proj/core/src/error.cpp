#include "tsdid/error.hpp"

namespace tsdid {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Parse: return "E_PARSE";
        case ErrorCode::EmptyFile: return "E_EMPTY_FILE";
        case ErrorCode::MissingColumn: return "E_MISSING_COLUMN";
        case ErrorCode::DuplicateUnitTime: return "E_DUPLICATE_UNIT_TIME";
        case ErrorCode::NonNumericOutcome: return "E_NON_NUMERIC";
        case ErrorCode::NonIntegerTime: return "E_NON_INTEGER_TIME";
        case ErrorCode::InconsistentGroup: return "E_INCONSISTENT_GROUP";
        case ErrorCode::InvalidWeight: return "E_INVALID_WEIGHT";
        case ErrorCode::InvalidShares: return "E_INVALID_SHARES";
        case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
        case ErrorCode::NoUntreatedObservations: return "E_NO_UNTREATED";
        case ErrorCode::NoTreatedObservations: return "E_NO_TREATED";
        case ErrorCode::UnseenLevel: return "E_UNSEEN_LEVEL";
        case ErrorCode::DidNotConverge: return "E_NOT_CONVERGED";
        case ErrorCode::SingularCovariates: return "E_SINGULAR_COVARIATES";
        case ErrorCode::NoRowsSelected: return "E_NO_ROWS";
        case ErrorCode::AllColumnsCollinear: return "E_ALL_COLLINEAR";
        case ErrorCode::DegenerateDesign: return "E_DEGENERATE_DESIGN";
        case ErrorCode::SingularSecondStageGram: return "E_SINGULAR_SECOND_STAGE";
        case ErrorCode::SingularFirstStageGram: return "E_SINGULAR_FIRST_STAGE";
        case ErrorCode::TooManyFailedReplicates: return "E_BOOTSTRAP_FAILED";
    }
    return "E_UNKNOWN";
}

bool is_data_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Parse:
        case ErrorCode::EmptyFile:
        case ErrorCode::MissingColumn:
        case ErrorCode::DuplicateUnitTime:
        case ErrorCode::NonNumericOutcome:
        case ErrorCode::NonIntegerTime:
        case ErrorCode::InconsistentGroup:
        case ErrorCode::InvalidWeight:
        case ErrorCode::InvalidShares:
        case ErrorCode::InvalidArgument:
            return true;
        default:
            return false;
    }
}

}  // namespace tsdid
