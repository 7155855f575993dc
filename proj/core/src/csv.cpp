#include "tsdid/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "tsdid/error.hpp"

namespace tsdid {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

bool is_inf_token(std::string_view s) {
    return s == "inf" || s == "Inf" || s == "INF" || s == "+inf" || s == "Inf.0";
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return j;
    }
    throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in header");
}

std::string location(std::size_t line_no) { return " (line " + std::to_string(line_no) + ")"; }

}  // namespace

std::vector<std::string> split_record(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == delimiter) {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (in_quotes) throw Error(ErrorCode::Parse, "unterminated quoted field");
    fields.emplace_back(trim(current));
    return fields;
}

PanelDataset read_csv(std::istream& in, const ColumnSpec& spec) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (!trim(line).empty()) {
            header = split_record(line, spec.delimiter);
            break;
        }
    }
    if (header.empty()) throw Error(ErrorCode::EmptyFile, "file is empty (no header row)");

    const std::size_t unit_col = column_index(header, spec.unit);
    const std::size_t time_col = column_index(header, spec.time);
    const std::size_t outcome_col = column_index(header, spec.outcome);
    const std::size_t group_col = column_index(header, spec.group);
    std::optional<std::size_t> cluster_col;
    std::optional<std::size_t> weight_col;
    if (spec.cluster) cluster_col = column_index(header, *spec.cluster);
    if (spec.weight) weight_col = column_index(header, *spec.weight);
    std::vector<std::size_t> cov_cols;
    for (const auto& name : spec.covariates) cov_cols.push_back(column_index(header, name));

    PanelColumns cols;
    cols.covariate_names = spec.covariates;
    cols.covariates.resize(cov_cols.size());

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_record(line, spec.delimiter);
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::Parse, "expected " + std::to_string(header.size()) + " fields, found " +
                                              std::to_string(fields.size()) + location(line_no));
        }

        if (fields[unit_col].empty()) throw Error(ErrorCode::Parse, "empty unit identifier" + location(line_no));
        cols.unit.push_back(fields[unit_col]);

        const auto t = parse_double(fields[time_col]);
        if (!t) throw Error(ErrorCode::NonIntegerTime, "time '" + fields[time_col] + "' is not numeric" + location(line_no));
        if (*t != std::floor(*t) || std::abs(*t) > 1e9) {
            throw Error(ErrorCode::NonIntegerTime, "time '" + fields[time_col] + "' is not an integer" + location(line_no));
        }
        cols.time.push_back(static_cast<int>(*t));

        const auto y = parse_double(fields[outcome_col]);
        if (!y || !std::isfinite(*y)) {
            throw Error(ErrorCode::NonNumericOutcome,
                        "outcome '" + fields[outcome_col] + "' is missing or not numeric" + location(line_no));
        }
        cols.outcome.push_back(*y);

        const std::string& gcell = fields[group_col];
        if (gcell.empty() || is_inf_token(gcell)) {
            cols.group.push_back(GroupStatus::never());
        } else {
            const auto g = parse_double(gcell);
            if (!g) throw Error(ErrorCode::Parse, "group '" + gcell + "' is not numeric or inf" + location(line_no));
            if (spec.never_sentinel && *g == *spec.never_sentinel) {
                cols.group.push_back(GroupStatus::never());
            } else if (std::isinf(*g)) {
                cols.group.push_back(GroupStatus::never());
            } else {
                if (*g != std::floor(*g) || std::abs(*g) > 1e9) {
                    throw Error(ErrorCode::NonIntegerTime, "group '" + gcell + "' is not an integer period" + location(line_no));
                }
                cols.group.push_back(GroupStatus::treated(static_cast<int>(*g)));
            }
        }

        if (cluster_col) cols.cluster.push_back(fields[*cluster_col]);
        if (weight_col) {
            const auto w = parse_double(fields[*weight_col]);
            if (!w) throw Error(ErrorCode::InvalidWeight, "weight '" + fields[*weight_col] + "' is not numeric" + location(line_no));
            cols.weight.push_back(*w);
        }
        for (std::size_t j = 0; j < cov_cols.size(); ++j) {
            const auto x = parse_double(fields[cov_cols[j]]);
            if (!x || !std::isfinite(*x)) {
                throw Error(ErrorCode::NonNumericOutcome, "covariate '" + spec.covariates[j] + "' value '" +
                                                              fields[cov_cols[j]] + "' is not numeric" + location(line_no));
            }
            cols.covariates[j].push_back(*x);
        }
    }
    if (cols.unit.empty()) throw Error(ErrorCode::EmptyFile, "file has a header but no data rows");
    return PanelDataset::from_columns(std::move(cols));
}

PanelDataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path.string() + "'");
    return read_csv(in, spec);
}

std::string format_double(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

namespace {

void write_field(std::ostream& out, const std::string& field, char delimiter) {
    if (field.find(delimiter) == std::string::npos && field.find('"') == std::string::npos) {
        out << field;
        return;
    }
    out << '"';
    for (char c : field) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

}  // namespace

void write_csv(std::ostream& out, const PanelDataset& data, const ColumnSpec& spec,
               std::span<const ExtraColumn> extra) {
    const char d = spec.delimiter;
    for (const auto& col : extra) {
        if (col.values.size() != data.n_rows()) {
            throw Error(ErrorCode::InvalidArgument, "extra column '" + col.name + "' length does not match panel");
        }
    }
    const bool with_cluster = data.has_cluster_column();
    const bool with_weight = data.has_weight_column();

    write_field(out, spec.unit, d);
    out << d;
    write_field(out, spec.time, d);
    out << d;
    write_field(out, spec.outcome, d);
    out << d;
    write_field(out, spec.group, d);
    if (with_cluster) {
        out << d;
        write_field(out, spec.cluster.value_or("cluster"), d);
    }
    if (with_weight) {
        out << d;
        write_field(out, spec.weight.value_or("weight"), d);
    }
    for (const auto& name : data.covariate_names()) {
        out << d;
        write_field(out, name, d);
    }
    for (const auto& col : extra) {
        out << d;
        write_field(out, col.name, d);
    }
    out << '\n';

    const auto clusters = data.cluster_of_row();
    const auto weights = data.weights();
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        const auto& obs = data.row(i);
        write_field(out, data.unit_label(obs.unit), d);
        out << d << obs.time << d << format_double(obs.outcome) << d << data.group_of_unit(obs.unit).label();
        if (with_cluster) {
            out << d;
            write_field(out, data.cluster_label(clusters[i]), d);
        }
        if (with_weight) out << d << format_double(weights[i]);
        for (std::size_t j = 0; j < data.n_covariates(); ++j) out << d << format_double(data.covariate(j)[i]);
        for (const auto& col : extra) out << d << format_double(col.values[i]);
        out << '\n';
    }
}

}  // namespace tsdid
