#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tsdid/dense_ols.hpp"

using namespace tsdid;
using testing::code_of;

TEST_CASE("weighted least squares with gram inverse") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 0, 1, 1, 1, 2, 1, 3;
    const Eigen::VectorXd y = (Eigen::VectorXd(4) << 1, 3, 5, 7.5).finished();
    const Eigen::VectorXd w = (Eigen::VectorXd(4) << 1, 2, 1, 0.5).finished();
    const DenseOlsFit fit = dense_ols(y, X, w);
    const Eigen::MatrixXd xtwx = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd beta = xtwx.ldlt().solve(X.transpose() * w.asDiagonal() * y);
    CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fit.gram_inverse - xtwx.inverse()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fit.residuals - (y - X * beta)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit.rank_deficient_columns.empty());
    // Weighted normal equations hold.
    CHECK((X.transpose() * w.asDiagonal() * fit.residuals).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collinear columns are dropped, not fabricated") {
    Eigen::MatrixXd X(4, 3);
    X << 1, 0, 1, 1, 1, 0, 1, 0, 1, 1, 1, 0;  // col2 = col0 - col1
    const Eigen::VectorXd y = (Eigen::VectorXd(4) << 1, 2, 1, 2).finished();
    const DenseOlsFit fit = dense_ols(y, X, Eigen::VectorXd::Ones(4));
    CHECK(fit.retained_columns.size() == 2);
    REQUIRE(fit.rank_deficient_columns.size() == 1);
    CHECK(std::isnan(fit.coefficients[fit.rank_deficient_columns[0]]));
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate inputs") {
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
    CHECK(code_of([&] { (void)dense_ols(y, Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Ones(3)); }) ==
          ErrorCode::AllColumnsCollinear);
    CHECK(code_of([&] { (void)dense_ols(y, Eigen::MatrixXd::Ones(3, 1), Eigen::VectorXd::Zero(3)); }) ==
          ErrorCode::NoRowsSelected);
    CHECK(code_of([&] { (void)dense_ols(y, Eigen::MatrixXd::Ones(2, 1), Eigen::VectorXd::Ones(3)); }) ==
          ErrorCode::InvalidArgument);
}
