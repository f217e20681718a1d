#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace skewfb::fbsde {

/// Least-squares fit of several targets on a total-degree polynomial basis
/// of standardized state features.
class PolyFit {
public:
    PolyFit() = default;

    /// Rows of `features` are samples. Coordinates with (numerically) zero
    /// spread are dropped from the basis. A rank-deficient design is
    /// truncated to its leading pivoted columns and a note is appended to
    /// `warnings`.
    static PolyFit fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, int degree,
                       std::vector<std::string>* warnings = nullptr);

    /// Fitted targets at one state (row vector of length targets.cols()).
    Eigen::RowVectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Fitted targets at each row of `features`.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const;

    /// Coefficient of determination per target column (1 for a constant target).
    const Eigen::VectorXd& r2() const noexcept { return r2_; }
    int basis_size() const noexcept { return static_cast<int>(exponents_.size()); }
    int full_basis_size() const noexcept { return full_size_; }
    bool empty() const noexcept { return exponents_.empty(); }

private:
    double monomial(const std::vector<int>& e, const Eigen::Ref<const Eigen::VectorXd>& x) const;

    Eigen::VectorXd center_, scale_;
    std::vector<int> kept_;                   // feature indices used
    std::vector<std::vector<int>> exponents_; // per basis function, over kept_
    Eigen::MatrixXd coef_;                    // basis x targets
    Eigen::VectorXd r2_;
    int full_size_ = 0;
};

}  // namespace skewfb::fbsde
