#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tsdid/panel.hpp"

namespace tsdid {

struct GroupConfig {
    std::optional<int> first_period;  // nullopt: never treated
    double share = 0.0;               // fraction of units
    double base_effect = 0.0;         // effect in the first treated period
    double slope = 0.0;               // added per period since treatment
    double unit_fe_mean = 0.0;        // mean of the group's unit effects
};

/// Staggered-adoption panel generator:
///   y_it = mu_i + eta_t + tau_gt D_it + eps_it,
///   mu_i ~ N(group mean, unit_fe_sd), eta_t = time_fe_slope (t - start),
///   tau_gt = base + slope (t - g), eps ~ N(0, noise_sd).
struct DgpConfig {
    int n_units = 5000;
    int start = 1990;
    int end = 2020;
    std::vector<GroupConfig> groups{
        {2000, 1.0 / 3.0, 1.0, 0.02, 2.0},
        {2010, 1.0 / 3.0, 3.0, 0.25, 1.0},
        {std::nullopt, 1.0 / 3.0, 0.0, 0.0, 0.0},
    };
    double unit_fe_sd = 1.0;
    double time_fe_slope = 0.1;
    double noise_sd = 0.5;
    std::uint64_t seed = 1;
};

struct DgpTruth {
    std::map<std::pair<int, int>, double> tau_gt;  // (g, t) -> effect, treated cells
    std::map<int, double> tau_k;                   // unit-weighted mean over treated groups at t - g = k
    double tau_overall = 0.0;                      // mean effect over treated rows
};

struct SimulatedPanel {
    PanelDataset data;
    DgpTruth truth;
    std::vector<double> te;              // base effect on treated rows, else 0
    std::vector<double> te_dynamic;      // slope (t - g) on treated rows, else 0
    std::vector<double> counterfactual;  // mu_i + eta_t
};

/// Throws InvalidShares (shares negative or not summing to 1) and
/// InvalidArgument (empty period range, n_units < 1, negative sd).
[[nodiscard]] SimulatedPanel simulate(const DgpConfig& config);

/// unit,time,outcome,group,te,te_dynamic,counterfactual
void write_simulated_csv(std::ostream& out, const SimulatedPanel& panel);

}  // namespace tsdid
