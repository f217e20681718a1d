#include "skewfb/fbsde/regression.hpp"

#include "skewfb/errors.hpp"

#include <cmath>

namespace skewfb::fbsde {

namespace {

void exponent_sets(int dims, int degree, std::vector<int>& cur, int used,
                   std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == dims) {
        out.push_back(cur);
        return;
    }
    for (int e = 0; e + used <= degree; ++e) {
        cur.push_back(e);
        exponent_sets(dims, degree, cur, used + e, out);
        cur.pop_back();
    }
}

}  // namespace

double PolyFit::monomial(const std::vector<int>& e, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    double v = 1.0;
    for (std::size_t j = 0; j < kept_.size(); ++j) {
        if (e[j] == 0) continue;
        const int f = kept_[j];
        v *= std::pow((x(f) - center_(f)) / scale_(f), e[j]);
    }
    return v;
}

PolyFit PolyFit::fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, int degree,
                     std::vector<std::string>* warnings) {
    if (features.rows() != targets.rows() || features.rows() == 0) {
        throw DimensionError("regression needs matching nonempty samples");
    }
    if (degree < 0) throw ParameterError("regression degree must be nonnegative");
    const Eigen::Index n = features.rows();
    PolyFit out;
    out.center_ = features.colwise().mean().transpose();
    out.scale_ = Eigen::VectorXd::Ones(features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        const double sd =
            std::sqrt((features.col(j).array() - out.center_(j)).square().sum() / static_cast<double>(n));
        if (sd > 1e-12 * (1.0 + std::abs(out.center_(j)))) {
            out.scale_(j) = sd;
            out.kept_.push_back(static_cast<int>(j));
        }
    }
    std::vector<std::vector<int>> all;
    std::vector<int> cur;
    exponent_sets(static_cast<int>(out.kept_.size()), degree, cur, 0, all);
    out.full_size_ = static_cast<int>(all.size());
    out.exponents_ = all;

    Eigen::MatrixXd A(n, static_cast<Eigen::Index>(all.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = features.row(i).transpose();
        for (std::size_t b = 0; b < all.size(); ++b) A(i, static_cast<Eigen::Index>(b)) = out.monomial(all[b], x);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    if (rank < A.cols()) {
        std::vector<std::vector<int>> kept;
        Eigen::MatrixXd Ar(n, rank);
        for (Eigen::Index r = 0; r < rank; ++r) {
            const Eigen::Index c = qr.colsPermutation().indices()(r);
            kept.push_back(all[static_cast<std::size_t>(c)]);
            Ar.col(r) = A.col(c);
        }
        if (warnings) {
            warnings->push_back("regression basis truncated from " + std::to_string(A.cols()) + " to " +
                                std::to_string(rank) + " functions (rank deficient)");
        }
        out.exponents_ = std::move(kept);
        A = std::move(Ar);
        qr.compute(A);
    }
    out.coef_ = qr.solve(targets);

    const Eigen::MatrixXd resid = targets - A * out.coef_;
    out.r2_.resize(targets.cols());
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
        const double mean = targets.col(c).mean();
        const double tot = (targets.col(c).array() - mean).square().sum();
        const double res = resid.col(c).squaredNorm();
        out.r2_(c) = tot > 1e-300 ? 1.0 - res / tot : 1.0;
    }
    return out;
}

Eigen::RowVectorXd PolyFit::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(coef_.cols());
    for (std::size_t b = 0; b < exponents_.size(); ++b) {
        v += monomial(exponents_[b], x) * coef_.row(static_cast<Eigen::Index>(b));
    }
    return v;
}

Eigen::MatrixXd PolyFit::predict(const Eigen::MatrixXd& features) const {
    Eigen::MatrixXd out(features.rows(), coef_.cols());
    for (Eigen::Index i = 0; i < features.rows(); ++i) out.row(i) = (*this)(features.row(i).transpose());
    return out;
}

}  // namespace skewfb::fbsde
