#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsdid/panel.hpp"

namespace tsdid {

/// Column names and parsing options for panel CSV files.
struct ColumnSpec {
    std::string unit = "unit";
    std::string time = "time";
    std::string outcome = "outcome";
    std::string group = "group";
    std::optional<std::string> cluster;
    std::optional<std::string> weight;
    std::vector<std::string> covariates;
    char delimiter = ',';
    // A numeric group value that also means "never treated" (e.g. 0).
    std::optional<double> never_sentinel;
};

/// Reads a header-first tidy panel. Group cells "inf"/"Inf"/empty (or the
/// configured sentinel) mean never treated.
[[nodiscard]] PanelDataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec);
[[nodiscard]] PanelDataset read_csv(std::istream& in, const ColumnSpec& spec);

/// A named numeric column appended after the panel columns on output.
struct ExtraColumn {
    std::string name;
    std::span<const double> values;
};

/// Writes unit,time,outcome,group[,cluster,weight][,covariates...][,extra...]
/// using the names in `spec`. Never-treated groups are written as "inf".
void write_csv(std::ostream& out, const PanelDataset& data, const ColumnSpec& spec,
               std::span<const ExtraColumn> extra = {});

/// Shortest decimal representation that parses back to the same double.
[[nodiscard]] std::string format_double(double value);

/// Splits one delimited record, honouring double-quoted fields.
[[nodiscard]] std::vector<std::string> split_record(std::string_view line, char delimiter);

}  // namespace tsdid
