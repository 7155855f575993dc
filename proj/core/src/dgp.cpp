#include "tsdid/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tsdid/csv.hpp"
#include "tsdid/error.hpp"

namespace tsdid {
namespace {

void validate(const DgpConfig& c) {
    if (c.groups.empty()) throw Error(ErrorCode::InvalidShares, "at least one group is required");
    double total = 0.0;
    for (const auto& g : c.groups) {
        if (!(g.share >= 0.0) || !std::isfinite(g.share)) {
            throw Error(ErrorCode::InvalidShares, "group shares must be non-negative");
        }
        total += g.share;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidShares, "group shares sum to " + format_double(total) + ", not 1");
    }
    if (c.n_units < 1) throw Error(ErrorCode::InvalidArgument, "n_units must be positive");
    if (c.end < c.start) throw Error(ErrorCode::InvalidArgument, "period range is empty");
    if (!(c.noise_sd >= 0.0) || !(c.unit_fe_sd >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "standard deviations must be non-negative");
    }
    for (const auto& g : c.groups) {
        if (g.first_period && (*g.first_period <= c.start || *g.first_period > c.end)) {
            throw Error(ErrorCode::InvalidArgument, "group first period " + std::to_string(*g.first_period) +
                                                        " must lie after the first period and within the window");
        }
    }
}

// Largest-remainder apportionment of n units to the group shares.
std::vector<int> unit_counts(const DgpConfig& c) {
    const std::size_t m = c.groups.size();
    std::vector<int> counts(m);
    std::vector<double> rem(m);
    int assigned = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double exact = c.groups[j].share * c.n_units;
        counts[j] = static_cast<int>(std::floor(exact));
        rem[j] = exact - counts[j];
        assigned += counts[j];
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t j = 0; assigned < c.n_units; j = (j + 1) % m, ++assigned) ++counts[order[j]];
    return counts;
}

}  // namespace

SimulatedPanel simulate(const DgpConfig& c) {
    validate(c);
    const std::vector<int> counts = unit_counts(c);
    const int n_periods = c.end - c.start + 1;
    const auto n_rows = static_cast<std::size_t>(c.n_units) * static_cast<std::size_t>(n_periods);

    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);

    PanelColumns cols;
    cols.unit.reserve(n_rows);
    cols.time.reserve(n_rows);
    cols.outcome.reserve(n_rows);
    cols.group.reserve(n_rows);
    std::vector<double> te;
    std::vector<double> te_dynamic;
    std::vector<double> counterfactual;
    te.reserve(n_rows);
    te_dynamic.reserve(n_rows);
    counterfactual.reserve(n_rows);

    DgpTruth truth;
    std::map<int, std::pair<double, int>> by_k;  // sum of effects, number of units
    double treated_sum = 0.0;
    std::size_t treated_rows = 0;

    int unit = 0;
    for (std::size_t j = 0; j < c.groups.size(); ++j) {
        const GroupConfig& grp = c.groups[j];
        const GroupStatus status = grp.first_period ? GroupStatus::treated(*grp.first_period) : GroupStatus::never();
        if (grp.first_period && counts[j] > 0) {
            for (int t = c.start; t <= c.end; ++t) {
                const int k = t - *grp.first_period;
                const double tau = k >= 0 ? grp.base_effect + grp.slope * k : 0.0;
                if (k >= 0) truth.tau_gt[{*grp.first_period, t}] = tau;
                auto& [sum, n] = by_k[k];
                sum += tau * counts[j];
                n += counts[j];
            }
        }
        for (int u = 0; u < counts[j]; ++u, ++unit) {
            const double mu = grp.unit_fe_mean + c.unit_fe_sd * std_normal(rng);
            const std::string label = std::to_string(unit + 1);
            for (int t = c.start; t <= c.end; ++t) {
                const double eta = c.time_fe_slope * (t - c.start);
                const bool treated = grp.first_period && t >= *grp.first_period;
                const double base = treated ? grp.base_effect : 0.0;
                const double dyn = treated ? grp.slope * (t - *grp.first_period) : 0.0;
                const double eps = c.noise_sd * std_normal(rng);
                cols.unit.push_back(label);
                cols.time.push_back(t);
                cols.group.push_back(status);
                cols.outcome.push_back(mu + eta + base + dyn + eps);
                te.push_back(base);
                te_dynamic.push_back(dyn);
                counterfactual.push_back(mu + eta);
                if (treated) {
                    treated_sum += base + dyn;
                    ++treated_rows;
                }
            }
        }
    }
    for (const auto& [k, acc] : by_k) truth.tau_k[k] = acc.first / acc.second;
    truth.tau_overall = treated_rows > 0 ? treated_sum / static_cast<double>(treated_rows) : 0.0;

    return SimulatedPanel{PanelDataset::from_columns(std::move(cols)), std::move(truth), std::move(te),
                          std::move(te_dynamic), std::move(counterfactual)};
}

void write_simulated_csv(std::ostream& out, const SimulatedPanel& panel) {
    const ExtraColumn extra[] = {
        {"te", panel.te},
        {"te_dynamic", panel.te_dynamic},
        {"counterfactual", panel.counterfactual},
    };
    write_csv(out, panel.data, ColumnSpec{}, extra);
}

}  // namespace tsdid
