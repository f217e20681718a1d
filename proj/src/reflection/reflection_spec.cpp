#include "skewfb/reflection/reflection_spec.hpp"

#include "simplex.hpp"
#include "skewfb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace skewfb::reflection {

namespace {

Eigen::MatrixXd principal(const Eigen::MatrixXd& M, const std::vector<int>& idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) out(r, c) = M(idx[r], idx[c]);
    return out;
}

bool unit_diagonal(const Eigen::MatrixXd& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        if (std::abs(M(i, i) - 1.0) > 1e-12) return false;
    }
    return true;
}

}  // namespace

ReflectionSpec::ReflectionSpec(Domain domain, Eigen::MatrixXd R)
    : domain_(std::move(domain)), R_(std::move(R)) {
    if (R_.rows() != domain_.dim() || R_.cols() != domain_.faces()) {
        throw DimensionError("reflection matrix must be " + std::to_string(domain_.dim()) + "x" +
                             std::to_string(domain_.faces()) + ", got " +
                             std::to_string(R_.rows()) + "x" + std::to_string(R_.cols()));
    }
    if (!R_.allFinite()) throw ParameterError("reflection matrix has non-finite entries");

    face_matrix_ = domain_.normals().transpose() * R_;
    auto inverses = std::make_shared<std::vector<std::optional<Eigen::MatrixXd>>>(
        std::size_t{1} << domain_.faces());
    p_matrix_ = true;
    for (FaceSet set : domain_.compatible_sets()) {
        const Eigen::MatrixXd block = principal(face_matrix_, face_indices(set));
        Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
        lu.setThreshold(1e-12);
        if (!(lu.determinant() > 1e-12)) p_matrix_ = false;
        if (lu.isInvertible()) {
            Eigen::MatrixXd inv = lu.inverse();
            increment_bound_ = std::max(increment_bound_, inv.cwiseAbs().rowwise().sum().maxCoeff());
            (*inverses)[set] = std::move(inv);
        }
    }
    inverses_ = std::move(inverses);
}

const std::optional<Eigen::MatrixXd>& ReflectionSpec::block_inverse(FaceSet set) const {
    return inverses_->at(set);
}

ReflectionSpec ReflectionSpec::certified() const {
    ReflectionSpec out = *this;
    out.cs_.reset();
    out.spectral_.reset();
    out.cs_ = is_completely_s(out);
    if (unit_diagonal(face_matrix_)) out.spectral_ = spectral_radius_condition(out);
    return out;
}

SMatrixResult is_s_matrix(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) {
        throw DimensionError("S-matrix test needs a square matrix, got " +
                             std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
    }
    if (M.rows() == 0) throw DimensionError("S-matrix test needs a nonempty matrix");
    if (!M.allFinite()) throw ParameterError("matrix has non-finite entries");

    const Eigen::Index n = M.rows();
    // x = eps * 1 + x', x' >= 0:  M x' >= eps (1 - M 1)
    const Eigen::VectorXd rhs = kLpMargin * (Eigen::VectorXd::Ones(n) - M * Eigen::VectorXd::Ones(n));
    const double tol = 1e-9 * kLpMargin * std::max(1.0, rhs.cwiseAbs().maxCoeff() / kLpMargin);
    const auto shift = detail::lp_feasible_point(M, rhs, tol);
    if (!shift) return {};

    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, kLpMargin) + *shift;
    x /= x.maxCoeff();
    const Eigen::VectorXd Mx = M * x;
    if (!((x.array() > 0.0).all() && (Mx.array() > 0.0).all())) return {};
    return {true, x};
}

CompletelySCertificate is_completely_s(const ReflectionSpec& spec) {
    if (spec.completely_s()) return *spec.completely_s();
    CompletelySCertificate cert;
    for (FaceSet set : spec.domain().compatible_sets()) {
        const SMatrixResult r = is_s_matrix(principal(spec.face_matrix(), face_indices(set)));
        if (!r.holds) {
            cert.failing = set;
            return cert;
        }
        cert.witnesses.push_back({set, *r.witness});
    }
    cert.holds = true;
    return cert;
}

double spectral_radius_nonnegative(const Eigen::MatrixXd& A, double rel_tol) {
    if (A.rows() != A.cols()) throw DimensionError("spectral radius needs a square matrix");
    if ((A.array() < 0.0).any()) throw ParameterError("matrix must be entrywise nonnegative");
    auto norm = [](const Eigen::MatrixXd& B) { return B.rowwise().sum().maxCoeff(); };

    double scale = norm(A);
    if (A.size() == 0 || scale == 0.0) return 0.0;
    Eigen::MatrixXd B = A / scale;
    double log_norm = std::log(scale);  // A^power = exp(log_norm) * B, ||B|| = 1
    double power = 1.0;
    double estimate = scale;
    for (int k = 0; k < 64; ++k) {
        Eigen::MatrixXd B2 = B * B;
        const double c = norm(B2);
        if (c == 0.0) return 0.0;
        B = B2 / c;
        log_norm = 2.0 * log_norm + std::log(c);
        power *= 2.0;
        const double next = std::exp(log_norm / power);
        if (k >= 3 && std::abs(next - estimate) <= rel_tol * next) return next;
        estimate = next;
    }
    return estimate;
}

SpectralCertificate spectral_radius_condition(const ReflectionSpec& spec) {
    if (spec.spectral()) return *spec.spectral();
    const Eigen::MatrixXd& M = spec.face_matrix();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        if (std::abs(M(i, i) - 1.0) > 1e-12) {
            throw NormalizationError("diag(N'R) must be 1; face " + std::to_string(i) + " has " +
                                     std::to_string(M(i, i)));
        }
    }
    SpectralCertificate cert;
    cert.holds = true;
    for (FaceSet corner : spec.domain().corners()) {
        const auto idx = face_indices(corner);
        const Eigen::MatrixXd block = principal(M, idx);
        const Eigen::MatrixXd iteration =
            (Eigen::MatrixXd::Identity(block.rows(), block.cols()) - block).cwiseAbs();
        const double rho = spectral_radius_nonnegative(iteration);
        cert.radii.push_back(rho);
        cert.max_radius = std::max(cert.max_radius, rho);
        if (!(rho < 1.0)) cert.holds = false;
    }
    return cert;
}

ReflectionSpec normalized(const ReflectionSpec& spec) {
    Eigen::MatrixXd R = spec.matrix();
    const Eigen::MatrixXd& N = spec.domain().normals();
    for (int i = 0; i < spec.faces(); ++i) {
        const double d = N.col(i).dot(R.col(i));
        if (!(d > 0.0)) {
            throw NormalizationError("n_i . v_i must be positive on face " + std::to_string(i));
        }
        R.col(i) /= d;
    }
    return ReflectionSpec(spec.domain(), std::move(R));
}

void require_completely_s(const ReflectionSpec& spec) {
    const CompletelySCertificate cert = is_completely_s(spec);
    if (!cert.holds) {
        throw InfeasibleError("reflection matrix is not completely-S (face set mask " +
                              std::to_string(cert.failing.value_or(0)) + ")");
    }
}

}  // namespace skewfb::reflection
