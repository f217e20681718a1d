#include "simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace skewfb::reflection::detail {

std::optional<Eigen::VectorXd> lp_feasible_point(const Eigen::MatrixXd& A,
                                                 const Eigen::VectorXd& c, double tol) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    // columns: x (n) | surplus s (m) | artificial a (m) | rhs
    const int cols = n + 2 * m;
    const int rhs = cols;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, cols + 1);
    std::vector<int> basis(m);
    std::vector<bool> usable(cols, true);

    for (int i = 0; i < m; ++i) {
        if (c(i) >= 0.0) {
            T.row(i).head(n) = A.row(i);
            T(i, n + i) = -1.0;
            T(i, n + m + i) = 1.0;
            T(i, rhs) = c(i);
            basis[i] = n + m + i;
        } else {
            T.row(i).head(n) = -A.row(i);
            T(i, n + i) = 1.0;
            T(i, rhs) = -c(i);
            basis[i] = n + i;
            usable[n + m + i] = false;
        }
    }
    // objective row: reduced costs of min sum(a)
    for (int j = n + m; j < cols; ++j) T(m, j) = usable[j] ? 1.0 : 0.0;
    for (int i = 0; i < m; ++i) {
        if (basis[i] >= n + m) T.row(m) -= T.row(i);
    }

    constexpr double pivot_tol = 1e-12;
    const int max_pivots = 50 * (m + cols + 1);
    for (int iter = 0; iter < max_pivots; ++iter) {
        int enter = -1;
        for (int j = 0; j < cols; ++j) {
            if (usable[j] && T(m, j) < -pivot_tol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) break;

        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            if (T(i, enter) > pivot_tol) {
                const double ratio = T(i, rhs) / T(i, enter);
                if (ratio < best - 1e-15 ||
                    (std::abs(ratio - best) <= 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) break;  // unbounded direction; cannot happen in phase I

        T.row(leave) /= T(leave, enter);
        for (int i = 0; i <= m; ++i) {
            if (i != leave && T(i, enter) != 0.0) T.row(i) -= T(i, enter) * T.row(leave);
        }
        basis[leave] = enter;
    }

    const double infeasibility = -T(m, rhs);
    if (infeasibility > tol) return std::nullopt;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) x(basis[i]) = std::max(0.0, T(i, rhs));
    }
    return x;
}

}  // namespace skewfb::reflection::detail
