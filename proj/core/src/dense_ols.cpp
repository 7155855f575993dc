#include "tsdid/dense_ols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsdid/error.hpp"

namespace tsdid {

DenseOlsFit dense_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n || weights.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "dense_ols: y, X and weights must have the same number of rows");
    }
    if (n == 0 || !(weights.sum() > 0.0)) {
        throw Error(ErrorCode::NoRowsSelected, "regression has no rows with positive weight");
    }
    if ((weights.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "dense_ols: negative weight");
    if (p == 0) throw Error(ErrorCode::AllColumnsCollinear, "regression has no columns");

    const Eigen::VectorXd sw = weights.array().sqrt();
    const Eigen::MatrixXd xw = sw.asDiagonal() * X;
    const Eigen::VectorXd yw = sw.cwiseProduct(y);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    if (rank == 0) throw Error(ErrorCode::AllColumnsCollinear, "every regressor is zero or collinear");

    const auto& perm = qr.colsPermutation().indices();
    DenseOlsFit fit;
    std::vector<int> pivot_order(perm.data(), perm.data() + rank);
    fit.retained_columns = pivot_order;
    std::sort(fit.retained_columns.begin(), fit.retained_columns.end());
    for (int j = 0; j < p; ++j) {
        if (!std::binary_search(fit.retained_columns.begin(), fit.retained_columns.end(), j)) {
            fit.rank_deficient_columns.push_back(j);
        }
    }

    // Leading rank x rank block of R, in pivot order.
    const Eigen::MatrixXd r11 = qr.matrixR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qty = (qr.householderQ().transpose() * yw).head(rank);
    const Eigen::VectorXd b_piv = r11.triangularView<Eigen::Upper>().solve(qty);
    const Eigen::MatrixXd r_inv =
        r11.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(rank, rank));
    const Eigen::MatrixXd ginv_piv = r_inv * r_inv.transpose();

    fit.coefficients = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd b_full = Eigen::VectorXd::Zero(p);
    for (Eigen::Index k = 0; k < rank; ++k) {
        fit.coefficients[pivot_order[static_cast<std::size_t>(k)]] = b_piv[k];
        b_full[pivot_order[static_cast<std::size_t>(k)]] = b_piv[k];
    }
    fit.residuals = y - X * b_full;

    // Reorder the inverse Gram from pivot order to ascending column order.
    std::vector<Eigen::Index> pos(static_cast<std::size_t>(rank));
    for (Eigen::Index k = 0; k < rank; ++k) {
        const int col = pivot_order[static_cast<std::size_t>(k)];
        pos[static_cast<std::size_t>(k)] = std::lower_bound(fit.retained_columns.begin(), fit.retained_columns.end(), col) -
                                           fit.retained_columns.begin();
    }
    fit.gram_inverse.resize(rank, rank);
    for (Eigen::Index a = 0; a < rank; ++a) {
        for (Eigen::Index b = 0; b < rank; ++b) {
            fit.gram_inverse(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]) = ginv_piv(a, b);
        }
    }
    return fit;
}

}  // namespace tsdid
