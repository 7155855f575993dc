#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsdid/estimator.hpp"

namespace tsdid::cli {

enum ExitStatus : int {
    kSuccess = 0,
    kUsageError = 2,
    kDataError = 3,
    kEstimationError = 4,
};

/// Entry point of the `tsdid` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline constexpr int kSchemaVersion = 1;

[[nodiscard]] nlohmann::json result_to_json(const EstimateResult& result);
/// Inverse of result_to_json. Throws tsdid::Error(Parse) on schema mismatch.
[[nodiscard]] EstimateResult result_from_json(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json weights_to_json(const WeightDecomposition& weights);

/// term,estimate,ci_low,ci_high,estimator (95% normal intervals).
void write_plot_data(std::ostream& out, const std::vector<EstimateResult>& results);

/// estimator,term,estimate,std.error
void write_compare_table(std::ostream& out, const std::vector<EstimateResult>& results);

}  // namespace tsdid::cli
