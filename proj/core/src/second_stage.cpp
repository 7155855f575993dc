#include "tsdid/second_stage.hpp"

#include <algorithm>
#include <map>

#include "tsdid/error.hpp"

namespace tsdid {

std::string Term::label() const { return rel_ ? rel_->label() : std::string("treat"); }

std::optional<Term> Term::parse(const std::string& label) {
    if (label == "treat") return Term::treat();
    if (auto k = RelTime::parse(label)) return Term::relative(*k);
    return std::nullopt;
}

SecondStageDesign build_second_stage(const PanelDataset& data, const SecondStageSpec& spec) {
    const auto n = static_cast<Eigen::Index>(data.n_rows());
    SecondStageDesign design;
    if (spec.kind == SecondStageKind::Static) {
        design.terms.push_back(Term::treat());
        design.X.resize(n, 2);
        design.X.col(0).setOnes();
        for (Eigen::Index i = 0; i < n; ++i) design.X(i, 1) = data.row(static_cast<std::size_t>(i)).treated ? 1.0 : 0.0;
        return design;
    }

    if (spec.reference_levels.empty()) {
        throw Error(ErrorCode::InvalidArgument, "event-study specification needs at least one reference level");
    }
    std::map<RelTime, int> column_of;
    for (const auto& obs : data.rows()) {
        if (!spec.reference_levels.contains(obs.rel_time)) column_of.emplace(obs.rel_time, 0);
    }
    int col = 1;
    for (auto& [k, c] : column_of) {
        c = col++;
        design.terms.push_back(Term::relative(k));
    }
    design.X = Eigen::MatrixXd::Zero(n, col);
    design.X.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto it = column_of.find(data.row(static_cast<std::size_t>(i)).rel_time);
        if (it != column_of.end()) design.X(i, it->second) = 1.0;
    }
    return design;
}

bool in_horizon(const Term& term, const SecondStageSpec& spec) {
    if (term.is_static() || !spec.horizon) return true;
    const auto k = term.rel_time().k();
    if (!k) return false;
    return *k >= spec.horizon->first && *k <= spec.horizon->second;
}

SecondStageSpec post_treatment_event_study(const PanelDataset& data) {
    std::set<RelTime> refs{RelTime::never()};
    for (const auto& obs : data.rows()) {
        if (!obs.rel_time.is_never() && *obs.rel_time.k() < 0) refs.insert(obs.rel_time);
    }
    return SecondStageSpec::event_study(std::move(refs));
}

}  // namespace tsdid
