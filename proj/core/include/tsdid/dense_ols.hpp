#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tsdid {

struct DenseOlsFit {
    Eigen::VectorXd coefficients;        // one per column of X; NaN where dropped
    Eigen::VectorXd residuals;           // y - X b on every row
    Eigen::MatrixXd gram_inverse;        // (X'WX)^{-1} over retained columns, in column order
    std::vector<int> retained_columns;   // ascending
    std::vector<int> rank_deficient_columns;
};

/// Weighted least squares by column-pivoted Householder QR of sqrt(W) X.
/// Columns whose pivot falls below 1e-10 of the leading pivot are dropped.
/// Throws NoRowsSelected and AllColumnsCollinear.
[[nodiscard]] DenseOlsFit dense_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& weights);

}  // namespace tsdid
