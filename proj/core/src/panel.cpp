#include "tsdid/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "tsdid/error.hpp"

namespace tsdid {

std::string GroupStatus::label() const {
    return is_never() ? std::string("inf") : std::to_string(*first_period_);
}

std::string RelTime::label() const {
    return is_never() ? std::string("inf") : std::to_string(*k_);
}

std::optional<RelTime> RelTime::parse(std::string_view text) {
    if (text == "inf" || text == "Inf" || text == "INF" || text == "+inf") {
        return RelTime::never();
    }
    int k = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return RelTime::at(k);
}

PanelDataset PanelDataset::from_columns(PanelColumns columns) {
    const std::size_t n = columns.unit.size();
    if (n == 0) {
        throw Error(ErrorCode::EmptyFile, "panel has no observations");
    }
    if (columns.time.size() != n || columns.outcome.size() != n || columns.group.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "panel columns have mismatched lengths");
    }
    if (!columns.cluster.empty() && columns.cluster.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "cluster column length does not match panel");
    }
    if (!columns.weight.empty() && columns.weight.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "weight column length does not match panel");
    }
    if (columns.covariates.size() != columns.covariate_names.size()) {
        throw Error(ErrorCode::InvalidArgument, "covariate names and columns disagree");
    }
    for (const auto& cov : columns.covariates) {
        if (cov.size() != n) {
            throw Error(ErrorCode::InvalidArgument, "covariate column length does not match panel");
        }
    }

    PanelDataset data;
    data.rows_.resize(n);

    // Units, in order of first appearance; group status must be constant.
    data.unit_index_.reserve(n / 4 + 1);
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = data.unit_index_.try_emplace(columns.unit[i], static_cast<int>(data.unit_labels_.size()));
        if (inserted) {
            data.unit_labels_.push_back(columns.unit[i]);
            data.group_of_unit_.push_back(columns.group[i]);
        } else if (data.group_of_unit_[it->second] != columns.group[i]) {
            throw Error(ErrorCode::InconsistentGroup,
                        "unit '" + columns.unit[i] + "' has more than one treatment group (" +
                            data.group_of_unit_[it->second].label() + " vs " + columns.group[i].label() + ")");
        }
        if (!std::isfinite(columns.outcome[i])) {
            throw Error(ErrorCode::NonNumericOutcome,
                        "outcome for unit '" + columns.unit[i] + "' at time " + std::to_string(columns.time[i]) +
                            " is missing or not finite");
        }
        data.rows_[i].unit = it->second;
        data.rows_[i].time = columns.time[i];
        data.rows_[i].outcome = columns.outcome[i];
    }

    data.periods_ = columns.time;
    std::sort(data.periods_.begin(), data.periods_.end());
    data.periods_.erase(std::unique(data.periods_.begin(), data.periods_.end()), data.periods_.end());
    data.time_index_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto pos = std::lower_bound(data.periods_.begin(), data.periods_.end(), columns.time[i]);
        data.time_index_[i] = static_cast<int>(pos - data.periods_.begin());
    }

    {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto key = (static_cast<std::uint64_t>(data.rows_[i].unit) << 32) |
                             static_cast<std::uint32_t>(data.time_index_[i]);
            if (!seen.insert(key).second) {
                throw Error(ErrorCode::DuplicateUnitTime,
                            "duplicate observation for unit '" + columns.unit[i] + "' at time " +
                                std::to_string(columns.time[i]));
            }
        }
    }

    if (columns.cluster.empty()) {
        data.cluster_labels_ = data.unit_labels_;
        data.cluster_of_row_.resize(n);
        for (std::size_t i = 0; i < n; ++i) data.cluster_of_row_[i] = data.rows_[i].unit;
    } else {
        data.has_cluster_column_ = true;
        std::unordered_map<std::string, int> cluster_index;
        data.cluster_of_row_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto [it, inserted] =
                cluster_index.try_emplace(columns.cluster[i], static_cast<int>(data.cluster_labels_.size()));
            if (inserted) data.cluster_labels_.push_back(columns.cluster[i]);
            data.cluster_of_row_[i] = it->second;
        }
    }

    if (columns.weight.empty()) {
        data.weights_.assign(n, 1.0);
    } else {
        data.has_weight_column_ = true;
        bool any_positive = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = columns.weight[i];
            if (!std::isfinite(w) || w < 0.0) {
                throw Error(ErrorCode::InvalidWeight, "weights must be finite and nonnegative (row " +
                                                          std::to_string(i + 1) + ")");
            }
            any_positive = any_positive || w > 0.0;
        }
        if (!any_positive) throw Error(ErrorCode::InvalidWeight, "at least one weight must be positive");
        data.weights_ = std::move(columns.weight);
    }

    for (std::size_t j = 0; j < columns.covariates.size(); ++j) {
        for (double v : columns.covariates[j]) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::NonNumericOutcome,
                            "covariate '" + columns.covariate_names[j] + "' has a missing or non-finite value");
            }
        }
    }
    data.covariate_names_ = std::move(columns.covariate_names);
    data.covariates_ = std::move(columns.covariates);

    data.assign_treatment();
    return data;
}

void PanelDataset::assign_treatment() {
    for (auto& obs : rows_) {
        const auto g = group_of_unit_[obs.unit].first_period();
        if (g) {
            obs.rel_time = RelTime::at(obs.time - *g);
            obs.treated = obs.time >= *g;
        } else {
            obs.rel_time = RelTime::never();
            obs.treated = false;
        }
    }
}

std::optional<int> PanelDataset::find_unit(const std::string& label) const {
    auto it = unit_index_.find(label);
    if (it == unit_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> PanelDataset::find_period(int period) const {
    auto pos = std::lower_bound(periods_.begin(), periods_.end(), period);
    if (pos == periods_.end() || *pos != period) return std::nullopt;
    return static_cast<int>(pos - periods_.begin());
}

std::optional<std::size_t> PanelDataset::find_covariate(std::string_view name) const {
    for (std::size_t j = 0; j < covariate_names_.size(); ++j) {
        if (covariate_names_[j] == name) return j;
    }
    return std::nullopt;
}

std::size_t PanelDataset::n_treated() const {
    return static_cast<std::size_t>(
        std::count_if(rows_.begin(), rows_.end(), [](const Observation& o) { return o.treated; }));
}

PanelColumns PanelDataset::to_columns() const {
    PanelColumns cols;
    const std::size_t n = rows_.size();
    cols.unit.reserve(n);
    cols.time.reserve(n);
    cols.outcome.reserve(n);
    cols.group.reserve(n);
    for (const auto& obs : rows_) {
        cols.unit.push_back(unit_labels_[obs.unit]);
        cols.time.push_back(obs.time);
        cols.outcome.push_back(obs.outcome);
        cols.group.push_back(group_of_unit_[obs.unit]);
    }
    if (has_cluster_column_) {
        cols.cluster.reserve(n);
        for (int c : cluster_of_row_) cols.cluster.push_back(cluster_labels_[c]);
    }
    if (has_weight_column_) cols.weight = weights_;
    cols.covariate_names = covariate_names_;
    cols.covariates = covariates_;
    return cols;
}

PanelDataset derive_event_time(const PanelDataset& data, int anticipation) {
    if (anticipation < 0) {
        throw Error(ErrorCode::InvalidArgument, "anticipation must be nonnegative");
    }
    PanelDataset shifted = data;
    if (anticipation == 0) return shifted;
    for (auto& g : shifted.group_of_unit_) {
        if (auto first = g.first_period()) g = GroupStatus::treated(*first - anticipation);
    }
    shifted.assign_treatment();
    return shifted;
}

std::vector<char> untreated_mask(const PanelDataset& data) {
    std::vector<char> mask(data.n_rows());
    bool any = false;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        mask[i] = data.row(i).treated ? 0 : 1;
        any = any || mask[i] != 0;
    }
    if (!any) {
        throw Error(ErrorCode::NoUntreatedObservations,
                    "every observation is treated; fixed effects cannot be estimated from untreated rows");
    }
    return mask;
}

}  // namespace tsdid
