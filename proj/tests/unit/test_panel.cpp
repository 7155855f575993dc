#include <doctest.h>

#include "helpers.hpp"

using namespace tsdid;
using testing::code_of;
using testing::panel;

TEST_CASE("group status and event time labels") {
    CHECK(GroupStatus::never().label() == "inf");
    CHECK(GroupStatus::treated(2004).label() == "2004");
    CHECK(RelTime::at(-3).label() == "-3");
    CHECK(RelTime::never().label() == "inf");
    CHECK(RelTime::parse("Inf") == RelTime::never());
    CHECK(RelTime::parse("+2") == RelTime::at(2));
    CHECK_FALSE(RelTime::parse("x").has_value());
    CHECK_FALSE(RelTime::parse("").has_value());
    CHECK(RelTime::at(5) < RelTime::never());
    CHECK(RelTime::at(-1) < RelTime::at(0));
}

TEST_CASE("dataset indexing and treatment derivation") {
    const PanelDataset d = testing::hand_2x3();
    CHECK(d.n_rows() == 6);
    CHECK(d.n_units() == 2);
    CHECK(d.n_periods() == 3);
    CHECK(d.n_clusters() == 2);
    CHECK(d.n_treated() == 1);
    CHECK(d.unit_label(0) == "1");
    CHECK(d.find_unit("2") == 1);
    CHECK_FALSE(d.find_unit("3").has_value());
    CHECK(d.find_period(2) == 1);
    CHECK(d.row(5).treated);
    CHECK(d.row(5).rel_time == RelTime::at(0));
    CHECK(d.row(3).rel_time == RelTime::at(-2));
    CHECK(d.row(0).rel_time == RelTime::never());
    CHECK_FALSE(d.has_weight_column());
    for (double w : d.weights()) CHECK(w == 1.0);
}

TEST_CASE("periods are indexed in sorted order regardless of row order") {
    const PanelDataset d = panel({{"a", 5, 1, {}}, {"a", 3, 1, {}}, {"b", 4, 1, 4}, {"b", 3, 1, 4}});
    CHECK(d.periods()[0] == 3);
    CHECK(d.periods()[2] == 5);
    CHECK(d.time_index_of_row()[0] == 2);
    CHECK(d.time_index_of_row()[2] == 1);
}

TEST_CASE("validation errors") {
    CHECK(code_of([] { (void)panel({{"a", 1, 1, {}}, {"a", 1, 2, {}}}); }) == ErrorCode::DuplicateUnitTime);
    CHECK(code_of([] { (void)panel({{"a", 1, 1, 2}, {"a", 2, 2, 3}}); }) == ErrorCode::InconsistentGroup);
    CHECK(code_of([] { (void)panel({{"a", 1, std::nan(""), {}}}); }) == ErrorCode::NonNumericOutcome);
    CHECK(code_of([] { (void)PanelDataset::from_columns({}); }) == ErrorCode::EmptyFile);

    auto c = testing::columns({{"a", 1, 1, {}}, {"a", 2, 2, {}}});
    c.weight = {1.0, -1.0};
    CHECK(code_of([&] { (void)PanelDataset::from_columns(c); }) == ErrorCode::InvalidWeight);
    c.weight = {0.0, 0.0};
    CHECK(code_of([&] { (void)PanelDataset::from_columns(c); }) == ErrorCode::InvalidWeight);
    c.weight = {1.0};
    CHECK(code_of([&] { (void)PanelDataset::from_columns(c); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("explicit clusters") {
    auto c = testing::columns({{"a", 1, 1, {}}, {"b", 1, 2, {}}, {"c", 1, 3, 1}});
    c.cluster = {"x", "x", "y"};
    const PanelDataset d = PanelDataset::from_columns(c);
    CHECK(d.n_clusters() == 2);
    CHECK(d.has_cluster_column());
    CHECK(d.cluster_of_row()[1] == 0);
    CHECK(d.cluster_label(1) == "y");
}

TEST_CASE("to_columns reproduces the input") {
    auto c = testing::columns({{"a", 1, 1.5, {}}, {"a", 2, 2.5, {}}, {"b", 1, 3.5, 2}, {"b", 2, 4.5, 2}});
    c.weight = {1, 2, 3, 4};
    c.covariate_names = {"x"};
    c.covariates = {{0.1, 0.2, 0.3, 0.4}};
    const PanelColumns back = PanelDataset::from_columns(c).to_columns();
    CHECK(back.unit == c.unit);
    CHECK(back.time == c.time);
    CHECK(back.outcome == c.outcome);
    CHECK(back.group == c.group);
    CHECK(back.weight == c.weight);
    CHECK(back.covariates == c.covariates);
}

TEST_CASE("anticipation shifts first treated periods") {
    const PanelDataset d = testing::hand_2x3();
    const PanelDataset a = derive_event_time(d, 1);
    CHECK(a.n_treated() == 2);
    CHECK(a.row(4).treated);
    CHECK(a.row(4).rel_time == RelTime::at(0));
    CHECK(a.group_of_unit(1) == GroupStatus::treated(2));
    CHECK(a.group_of_unit(0).is_never());
    CHECK(code_of([&] { (void)derive_event_time(d, -1); }) == ErrorCode::InvalidArgument);

    const PanelDataset zero = derive_event_time(d, 0);
    for (std::size_t i = 0; i < d.n_rows(); ++i) CHECK(zero.row(i).rel_time == d.row(i).rel_time);
}

TEST_CASE("anticipation is additive") {
    const PanelDataset d = panel({{"a", 1, 0, 5}, {"a", 2, 0, 5}, {"a", 3, 0, 5}, {"a", 4, 0, 5}, {"a", 5, 0, 5},
                                  {"b", 1, 0, {}}, {"b", 5, 0, {}}});
    for (int a = 0; a <= 2; ++a) {
        for (int b = 0; b <= 2; ++b) {
            const PanelDataset two = derive_event_time(derive_event_time(d, a), b);
            const PanelDataset one = derive_event_time(d, a + b);
            for (std::size_t i = 0; i < d.n_rows(); ++i) {
                CHECK(two.row(i).rel_time == one.row(i).rel_time);
                CHECK(two.row(i).treated == one.row(i).treated);
            }
        }
    }
}

TEST_CASE("untreated mask") {
    const auto mask = untreated_mask(testing::hand_2x3());
    CHECK(mask == std::vector<char>{1, 1, 1, 1, 1, 0});
    const PanelDataset all = panel({{"a", 2, 1, 1}, {"a", 3, 1, 1}});
    CHECK(code_of([&] { (void)untreated_mask(all); }) == ErrorCode::NoUntreatedObservations);
}

TEST_CASE("error code names and classes") {
    CHECK(error_code_name(ErrorCode::Parse) == "E_PARSE");
    CHECK(error_code_name(ErrorCode::NoUntreatedObservations) == "E_NO_UNTREATED");
    CHECK(error_code_name(ErrorCode::UnseenLevel) == "E_UNSEEN_LEVEL");
    CHECK(error_code_name(ErrorCode::NoTreatedObservations) == "E_NO_TREATED");
    CHECK(is_data_error(ErrorCode::DuplicateUnitTime));
    CHECK_FALSE(is_data_error(ErrorCode::DidNotConverge));
}
