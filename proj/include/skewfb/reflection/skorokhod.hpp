#pragma once

#include "skewfb/reflection/reflection_spec.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace skewfb::reflection {

/// Values on a time grid; row k of `values` is the state at times[k].
struct DiscretePath {
    std::vector<double> times;
    Eigen::MatrixXd values;
};

/// A (D, R)-regulation of z on a grid: x = z + R y, x in D, y nondecreasing
/// from 0 and increasing on face i only at grid points where x is on face i.
struct RegulatedPath {
    std::vector<double> times;
    Eigen::MatrixXd x;  // (M+1) x p
    Eigen::MatrixXd y;  // (M+1) x b
    Eigen::MatrixXd z;  // (M+1) x p
    /// Steps whose complementarity problem had more than one solution.
    std::vector<std::size_t> nonunique_steps;
};

struct LcpResult {
    Eigen::VectorXd dx;
    Eigen::VectorXd dy;
    FaceSet active = 0;
    bool unique = true;
    /// Constant C with ||dy||_inf <= C ||dz||_inf (ReflectionSpec::increment_bound).
    double bound_constant = 0.0;
};

/// One jump of the Skorohod problem: finds dy >= 0 so that
/// x_pre + dz + R dy lies in D, with dy_i > 0 only on faces active at the
/// new point. Enumerates compatible active sets; when several solutions
/// exist the lexicographically smallest dy is returned and `unique` is false.
/// Throws InfeasibleError when no active set works.
LcpResult solve_jump_lcp(const Eigen::VectorXd& x_pre, const Eigen::VectorXd& dz,
                         const ReflectionSpec& spec);

/// Sequential per-step complementarity solve along the grid.
RegulatedPath skorokhod_solve(const DiscretePath& z, const ReflectionSpec& spec);

/// Continues a regulation from an existing end state: the first row of `z`
/// must equal the last free-path value of the previous segment and
/// `y_start` is the regulator there. Used to stream long paths in chunks.
RegulatedPath skorokhod_solve_from(const DiscretePath& z, const Eigen::VectorXd& y_start,
                                   const ReflectionSpec& spec);

struct FixedPointOptions {
    double tol = 1e-10;
    /// 0 means 10 * (number of grid steps).
    std::size_t max_iterations = 0;
};

/// Regulation by the running-supremum fixed point y -> Pi(y) (Harrison-Reiman
/// map). Requires diag(N'R) = 1 and the spectral condition; throws
/// ConvergenceError when the iteration cap is hit.
RegulatedPath skorokhod_fixed_point(const DiscretePath& z, const ReflectionSpec& spec,
                                    const FixedPointOptions& options = {});

struct RegulationCheck {
    bool in_domain = true;
    bool monotone = true;
    bool starts_at_zero = true;
    /// sum_k dy_i(t_k) * [x(t_k) not on face i], per face. Exactly zero for a
    /// valid regulation.
    Eigen::VectorXd complementarity;
    /// max_k ||x - z - R y||_inf
    double identity_residual = 0.0;
    bool ok() const;
};

RegulationCheck check_regulation(const RegulatedPath& path, const ReflectionSpec& spec);

/// CSV with header t,x_1..x_p,y_1..y_b, 17 significant digits.
void write_csv(std::ostream& os, const RegulatedPath& path);

}  // namespace skewfb::reflection
