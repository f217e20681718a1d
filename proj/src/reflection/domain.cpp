#include "skewfb/reflection/domain.hpp"

#include "skewfb/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace skewfb::reflection {

Domain::Domain(DomainKind kind, int p, Eigen::VectorXd upper) : kind_(kind), p_(p) {
    if (p < 1 || p > kMaxDim) {
        throw DimensionError("domain dimension must be in [1, " + std::to_string(kMaxDim) +
                             "], got " + std::to_string(p));
    }
    const int b = faces();
    normals_ = Eigen::MatrixXd::Zero(p, b);
    offsets_ = Eigen::VectorXd::Zero(b);
    for (int k = 0; k < p; ++k) normals_(k, k) = 1.0;
    if (kind == DomainKind::hyperbox) {
        for (int k = 0; k < p; ++k) {
            if (!(upper(k) > 0.0) || !std::isfinite(upper(k))) {
                throw ParameterError("hyperbox upper bounds must be finite and positive");
            }
            normals_(k, p + k) = -1.0;
            offsets_(p + k) = upper(k);
        }
    }
}

Domain Domain::orthant(int p) { return Domain(DomainKind::orthant, p, Eigen::VectorXd()); }

Domain Domain::hyperbox(const Eigen::VectorXd& upper) {
    return Domain(DomainKind::hyperbox, static_cast<int>(upper.size()), upper);
}

int Domain::opposite(int face) const noexcept {
    if (kind_ == DomainKind::orthant) return -1;
    return face < p_ ? face + p_ : face - p_;
}

double Domain::slack(int face, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const int k = axis(face);
    return is_upper(face) ? offsets_(face) - x(k) : x(k);
}

Eigen::VectorXd Domain::slacks(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != p_) throw DimensionError("point has wrong dimension");
    Eigen::VectorXd s(faces());
    for (int i = 0; i < faces(); ++i) s(i) = slack(i, x);
    return s;
}

bool Domain::contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const {
    for (int i = 0; i < faces(); ++i) {
        if (!(slack(i, x) >= -tol)) return false;
    }
    return true;
}

bool Domain::on_face(int face, const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const {
    return std::abs(slack(face, x)) <= tol;
}

bool Domain::compatible(FaceSet set) const noexcept {
    if (kind_ == DomainKind::orthant) return true;
    const FaceSet lower = set & ((FaceSet{1} << p_) - 1);
    const FaceSet upper = set >> p_;
    return (lower & upper) == 0;
}

std::vector<FaceSet> Domain::compatible_sets() const {
    std::vector<FaceSet> sets;
    const FaceSet all = FaceSet{1} << faces();
    for (FaceSet s = 1; s < all; ++s) {
        if (compatible(s)) sets.push_back(s);
    }
    std::stable_sort(sets.begin(), sets.end(), [](FaceSet a, FaceSet b) {
        const int pa = std::popcount(a), pb = std::popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    return sets;
}

std::vector<FaceSet> Domain::corners() const {
    std::vector<FaceSet> out;
    const FaceSet lower = (FaceSet{1} << p_) - 1;
    if (kind_ == DomainKind::orthant) return {lower};
    for (FaceSet choice = 0; choice < (FaceSet{1} << p_); ++choice) {
        // bit k of `choice` picks the upper face for coordinate k
        out.push_back((lower & ~choice) | (choice << p_));
    }
    return out;
}

double Domain::max_l1() const {
    if (kind_ == DomainKind::orthant) return std::numeric_limits<double>::infinity();
    return offsets_.tail(p_).sum();
}

std::vector<int> face_indices(FaceSet set) {
    std::vector<int> idx;
    for (int i = 0; set != 0; ++i, set >>= 1) {
        if (set & 1u) idx.push_back(i);
    }
    return idx;
}

}  // namespace skewfb::reflection
