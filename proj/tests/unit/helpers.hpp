#pragma once

#include <cmath>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "tsdid/error.hpp"
#include "tsdid/panel.hpp"

namespace testing {

struct Row {
    std::string unit;
    int time;
    double y;
    std::optional<int> g;  // nullopt: never treated
};

inline tsdid::PanelColumns columns(std::initializer_list<Row> rows) {
    tsdid::PanelColumns c;
    for (const auto& r : rows) {
        c.unit.push_back(r.unit);
        c.time.push_back(r.time);
        c.outcome.push_back(r.y);
        c.group.push_back(r.g ? tsdid::GroupStatus::treated(*r.g) : tsdid::GroupStatus::never());
    }
    return c;
}

inline tsdid::PanelDataset panel(std::initializer_list<Row> rows) {
    return tsdid::PanelDataset::from_columns(columns(rows));
}

// Unit 1 never treated (10, 11, 12); unit 2 treated from t = 3 (20, 21, 27).
inline tsdid::PanelDataset hand_2x3() {
    return panel({{"1", 1, 10, {}}, {"1", 2, 11, {}}, {"1", 3, 12, {}},
                  {"2", 1, 20, 3}, {"2", 2, 21, 3}, {"2", 3, 27, 3}});
}

// Early unit treated from t = 2, late unit from t = 3; no never-treated unit.
// Effects tau_E2, tau_E3, tau_L3 on top of exact unit and period effects.
inline tsdid::PanelDataset staggered_2x3(double tau_e2, double tau_e3, double tau_l3) {
    return panel({{"E", 1, 1.0, 2}, {"E", 2, 1.5 + tau_e2, 2}, {"E", 3, 3.0 + tau_e3, 2},
                  {"L", 1, 4.0, 3}, {"L", 2, 4.5, 3}, {"L", 3, 6.0 + tau_l3, 3}});
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1.0); }

template <class Fn>
tsdid::ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const tsdid::Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected tsdid::Error");
}

}  // namespace testing
