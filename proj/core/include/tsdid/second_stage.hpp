#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsdid/panel.hpp"

namespace tsdid {

enum class SecondStageKind { Static, EventStudy };

struct SecondStageSpec {
    SecondStageKind kind = SecondStageKind::Static;
    // Pooled omitted category for event studies.
    std::set<RelTime> reference_levels{RelTime::at(-1), RelTime::never()};
    // Inclusive [min k, max k] window of reported event-study terms.
    std::optional<std::pair<int, int>> horizon;

    [[nodiscard]] static SecondStageSpec static_effect() { return {}; }
    [[nodiscard]] static SecondStageSpec event_study(std::set<RelTime> refs = {RelTime::at(-1), RelTime::never()}) {
        SecondStageSpec s;
        s.kind = SecondStageKind::EventStudy;
        s.reference_levels = std::move(refs);
        return s;
    }
};

/// A reported coefficient: the static treatment effect or one event time.
class Term {
public:
    [[nodiscard]] static Term treat() { return Term{}; }
    [[nodiscard]] static Term relative(RelTime k) { return Term{k}; }

    [[nodiscard]] bool is_static() const { return !rel_.has_value(); }
    [[nodiscard]] RelTime rel_time() const { return rel_.value_or(RelTime::never()); }

    /// "treat" for the static term, otherwise the event time ("-2", "0", "inf").
    [[nodiscard]] std::string label() const;
    [[nodiscard]] static std::optional<Term> parse(const std::string& label);

    friend bool operator==(const Term&, const Term&) = default;

private:
    Term() = default;
    explicit Term(RelTime k) : rel_(k) {}
    std::optional<RelTime> rel_;
};

/// Second-stage regressors: column 0 is the intercept, column j + 1 is the
/// indicator for terms[j].
struct SecondStageDesign {
    Eigen::MatrixXd X;
    std::vector<Term> terms;
};

[[nodiscard]] SecondStageDesign build_second_stage(const PanelDataset& data, const SecondStageSpec& spec);

/// Whether a term falls inside the spec's reporting window.
[[nodiscard]] bool in_horizon(const Term& term, const SecondStageSpec& spec);

/// Every non-reference event time with all observed negative event times and
/// the never-treated marker as references: the specification under which the
/// two-stage and imputation estimators coincide term by term.
[[nodiscard]] SecondStageSpec post_treatment_event_study(const PanelDataset& data);

}  // namespace tsdid
