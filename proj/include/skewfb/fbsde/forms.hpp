#pragma once

#include "skewfb/fbsde/fbsde.hpp"

#include <Eigen/Dense>

namespace skewfb::fbsde {

enum class TerminalKind { affine, positive_part };

/// Coefficients affine in (x, v, u) with constant diffusion and jump data:
///   b = b0 + bx x + bv v + bu u           sigma = sigma (p x d)
///   eta_j(z) = eta_a(:, j) + eta_b(:, j) z
///   c = c0 + cx x + cu u + cuu (u .* u), plus the linear part cv v
///   H = h0 + hx x, or its positive part.
/// Empty matrices stand for zero blocks. The control dimension is taken
/// from bu / cu / cuu.
struct AffineForm {
    Eigen::VectorXd b0;
    Eigen::MatrixXd bx, bv, bu;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd eta_a, eta_b;
    Eigen::VectorXd c0;
    Eigen::MatrixXd cx, cv, cu, cuu;
    Eigen::VectorXd h0;
    Eigen::MatrixXd hx;
    TerminalKind terminal = TerminalKind::affine;
    double L = 1.0;  // constant growth bound
};

/// Builds a CoefficientSet for dimensions (p, q, d, h). Throws
/// DimensionError on mis-shaped blocks.
CoefficientSet affine_coefficients(const AffineForm& form, int p, int q, int d, int h);

/// Smallest constant L for which the affine form meets the growth bound
/// |f| <= L (1 + |x| + |v| + ...) in the max-abs norms, ignoring the control.
double affine_growth_bound(const AffineForm& form);

}  // namespace skewfb::fbsde
