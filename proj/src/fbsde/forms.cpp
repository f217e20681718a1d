#include "skewfb/fbsde/forms.hpp"

#include "skewfb/errors.hpp"

#include <algorithm>
#include <string>

namespace skewfb::fbsde {

namespace {

Eigen::MatrixXd block_or_zero(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.size() == 0) return Eigen::MatrixXd::Zero(rows, cols);
    if (m.rows() != rows || (cols >= 0 && m.cols() != cols)) {
        throw DimensionError(std::string(name) + " must be " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    return m;
}

Eigen::VectorXd vec_or_zero(const Eigen::VectorXd& v, Eigen::Index n, const char* name) {
    if (v.size() == 0) return Eigen::VectorXd::Zero(n);
    if (v.size() != n) throw DimensionError(std::string(name) + " must have length " + std::to_string(n));
    return v;
}

double inf_norm(const Eigen::MatrixXd& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

double maxabs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

CoefficientSet affine_coefficients(const AffineForm& f, int p, int q, int d, int h) {
    const Eigen::Index m = std::max({f.bu.cols(), f.cu.cols(), f.cuu.cols()});
    const Eigen::VectorXd b0 = vec_or_zero(f.b0, p, "b0");
    const Eigen::MatrixXd bx = block_or_zero(f.bx, p, p, "bx");
    const Eigen::MatrixXd bv = block_or_zero(f.bv, p, q, "bv");
    const Eigen::MatrixXd bu = block_or_zero(f.bu, p, m, "bu");
    const Eigen::MatrixXd sigma = block_or_zero(f.sigma, p, d, "sigma");
    const Eigen::MatrixXd eta_a = block_or_zero(f.eta_a, p, h, "eta_a");
    const Eigen::MatrixXd eta_b = block_or_zero(f.eta_b, p, h, "eta_b");
    const Eigen::VectorXd c0 = vec_or_zero(f.c0, q, "c0");
    const Eigen::MatrixXd cx = block_or_zero(f.cx, q, p, "cx");
    const Eigen::MatrixXd cu = block_or_zero(f.cu, q, m, "cu");
    const Eigen::MatrixXd cuu = block_or_zero(f.cuu, q, m, "cuu");
    const Eigen::VectorXd h0 = vec_or_zero(f.h0, q, "h0");
    const Eigen::MatrixXd hx = block_or_zero(f.hx, q, p, "hx");

    auto control = [m](const Args& a) -> Eigen::VectorXd {
        if (m == 0) return Eigen::VectorXd();
        if (a.u.size() != m) throw DimensionError("control must have length " + std::to_string(m));
        return a.u;
    };

    CoefficientSet cs;
    cs.q = q;
    cs.b = [=](const Args& a) -> Eigen::VectorXd {
        Eigen::VectorXd out = b0 + bx * a.x + bv * a.v;
        if (m > 0) out += bu * control(a);
        return out;
    };
    cs.sigma = [=](const Args&) -> Eigen::MatrixXd { return sigma; };
    if (h > 0) cs.eta = [=](const Args&) { return AffineJump{eta_a, eta_b}; };
    cs.c = [=](const Args& a) -> Eigen::VectorXd {
        Eigen::VectorXd out = c0 + cx * a.x;
        if (m > 0) {
            const Eigen::VectorXd u = control(a);
            out += cu * u + cuu * u.cwiseProduct(u);
        }
        return out;
    };
    if (f.cv.size() != 0) cs.c_linear = block_or_zero(f.cv, q, q, "cv");
    const bool positive = f.terminal == TerminalKind::positive_part;
    cs.H = [=](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd out = h0 + hx * x;
        if (positive) out = out.cwiseMax(0.0);
        return out;
    };
    const double L = f.L;
    cs.L = [L](double) { return L; };
    return cs;
}

double affine_growth_bound(const AffineForm& f) {
    return std::max({maxabs(f.b0), inf_norm(f.bx), inf_norm(f.bv), maxabs(f.sigma), maxabs(f.eta_a),
                     maxabs(f.eta_b), maxabs(f.c0), inf_norm(f.cx), inf_norm(f.cv)});
}

}  // namespace skewfb::fbsde
