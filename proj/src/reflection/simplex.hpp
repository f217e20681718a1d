#pragma once

#include <Eigen/Dense>

#include <optional>

namespace skewfb::reflection::detail {

/// Phase-I simplex (Bland's rule) for {x >= 0 : A x >= c}. Returns a
/// feasible point, or nullopt when the minimal artificial infeasibility
/// exceeds `tol`.
std::optional<Eigen::VectorXd> lp_feasible_point(const Eigen::MatrixXd& A,
                                                 const Eigen::VectorXd& c, double tol);

}  // namespace skewfb::reflection::detail
