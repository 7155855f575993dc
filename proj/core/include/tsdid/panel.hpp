#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsdid {

/// Treatment-adoption status of a unit: first treated period, or never treated.
class GroupStatus {
public:
    constexpr GroupStatus() = default;

    static constexpr GroupStatus never() { return GroupStatus{}; }
    static constexpr GroupStatus treated(int first_period) { return GroupStatus{first_period}; }

    [[nodiscard]] constexpr bool is_never() const { return !first_period_.has_value(); }
    [[nodiscard]] constexpr std::optional<int> first_period() const { return first_period_; }

    /// "inf" for never treated, else the first treated period.
    [[nodiscard]] std::string label() const;

    friend constexpr bool operator==(const GroupStatus&, const GroupStatus&) = default;

private:
    constexpr explicit GroupStatus(int first_period) : first_period_(first_period) {}
    std::optional<int> first_period_;
};

/// Event time of an observation relative to its unit's first treated period.
/// Finite values order before the never-treated marker.
class RelTime {
public:
    constexpr RelTime() = default;

    static constexpr RelTime never() { return RelTime{}; }
    static constexpr RelTime at(int k) { return RelTime{k}; }

    [[nodiscard]] constexpr bool is_never() const { return !k_.has_value(); }
    [[nodiscard]] constexpr std::optional<int> k() const { return k_; }

    [[nodiscard]] std::string label() const;
    /// Accepts "inf"/"Inf"/"INF" or a signed integer.
    [[nodiscard]] static std::optional<RelTime> parse(std::string_view text);

    friend constexpr bool operator==(const RelTime&, const RelTime&) = default;
    friend constexpr std::strong_ordering operator<=>(const RelTime& a, const RelTime& b) {
        if (a.is_never() || b.is_never()) {
            return static_cast<int>(a.is_never()) <=> static_cast<int>(b.is_never());
        }
        return *a.k_ <=> *b.k_;
    }

private:
    constexpr explicit RelTime(int k) : k_(k) {}
    std::optional<int> k_;
};

struct Observation {
    int unit = 0;        // contiguous unit index
    int time = 0;        // period value (not index)
    double outcome = 0.0;
    bool treated = false;
    RelTime rel_time;
};

/// Column-oriented raw input used to build a validated PanelDataset.
struct PanelColumns {
    std::vector<std::string> unit;
    std::vector<int> time;
    std::vector<double> outcome;
    std::vector<GroupStatus> group;
    std::vector<std::string> cluster;  // empty: cluster by unit
    std::vector<double> weight;        // empty: unit weights
    std::vector<std::string> covariate_names;
    std::vector<std::vector<double>> covariates;  // one vector per name
};

/// Validated long-format panel. Immutable after construction.
///
/// Unit and cluster indices follow order of first appearance in the input;
/// period indices follow sorted period order.
class PanelDataset {
public:
    /// Throws tsdid::Error on DuplicateUnitTime, InconsistentGroup,
    /// InvalidWeight, NonNumericOutcome, EmptyFile or InvalidArgument.
    [[nodiscard]] static PanelDataset from_columns(PanelColumns columns);

    [[nodiscard]] std::size_t n_rows() const { return rows_.size(); }
    [[nodiscard]] std::span<const Observation> rows() const { return rows_; }
    [[nodiscard]] const Observation& row(std::size_t i) const { return rows_[i]; }

    [[nodiscard]] std::size_t n_units() const { return unit_labels_.size(); }
    [[nodiscard]] const std::string& unit_label(int unit) const { return unit_labels_[unit]; }
    [[nodiscard]] std::optional<int> find_unit(const std::string& label) const;
    [[nodiscard]] GroupStatus group_of_unit(int unit) const { return group_of_unit_[unit]; }
    [[nodiscard]] GroupStatus group_of_row(std::size_t i) const { return group_of_unit_[rows_[i].unit]; }

    [[nodiscard]] std::size_t n_periods() const { return periods_.size(); }
    [[nodiscard]] std::span<const int> periods() const { return periods_; }
    [[nodiscard]] std::span<const int> time_index_of_row() const { return time_index_; }
    [[nodiscard]] std::optional<int> find_period(int period) const;

    [[nodiscard]] std::size_t n_clusters() const { return cluster_labels_.size(); }
    [[nodiscard]] std::span<const int> cluster_of_row() const { return cluster_of_row_; }
    [[nodiscard]] const std::string& cluster_label(int cluster) const { return cluster_labels_[cluster]; }
    [[nodiscard]] bool has_cluster_column() const { return has_cluster_column_; }

    [[nodiscard]] std::span<const double> weights() const { return weights_; }
    [[nodiscard]] bool has_weight_column() const { return has_weight_column_; }

    [[nodiscard]] std::size_t n_covariates() const { return covariate_names_.size(); }
    [[nodiscard]] const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    [[nodiscard]] std::span<const double> covariate(std::size_t j) const { return covariates_[j]; }
    [[nodiscard]] std::optional<std::size_t> find_covariate(std::string_view name) const;

    [[nodiscard]] std::size_t n_treated() const;

    /// Inverse of from_columns: reconstructs the raw columns (cluster/weight
    /// columns only when the dataset was built with them).
    [[nodiscard]] PanelColumns to_columns() const;

    friend PanelDataset derive_event_time(const PanelDataset& data, int anticipation);

private:
    PanelDataset() = default;
    void assign_treatment();

    std::vector<Observation> rows_;
    std::vector<std::string> unit_labels_;
    std::unordered_map<std::string, int> unit_index_;
    std::vector<GroupStatus> group_of_unit_;
    std::vector<int> periods_;
    std::vector<int> time_index_;
    std::vector<std::string> cluster_labels_;
    std::vector<int> cluster_of_row_;
    bool has_cluster_column_ = false;
    std::vector<double> weights_;
    bool has_weight_column_ = false;
    std::vector<std::string> covariate_names_;
    std::vector<std::vector<double>> covariates_;
};

/// Shifts every first-treated period earlier by `anticipation` periods and
/// recomputes treatment flags and event times.
[[nodiscard]] PanelDataset derive_event_time(const PanelDataset& data, int anticipation);

/// mask[i] != 0 iff row i is untreated. Throws NoUntreatedObservations when
/// every row is treated.
[[nodiscard]] std::vector<char> untreated_mask(const PanelDataset& data);

}  // namespace tsdid
