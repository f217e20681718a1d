#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace skewfb::reflection {

/// Absolute tolerance deciding whether a point lies on a face.
inline constexpr double kBoundaryTol = 1e-9;

/// Bitmask over face indices (bit i set = face i selected). Domains have at
/// most 16 faces, so p <= 8.
using FaceSet = std::uint32_t;

inline constexpr int kMaxDim = 8;

enum class DomainKind { orthant, hyperbox };

/// Orthant {x >= 0} or hyperbox [0, u_1] x ... x [0, u_p].
///
/// Faces 0..p-1 are the lower faces {x_k = 0} with inward normal e_k. For a
/// hyperbox, faces p..2p-1 are the upper faces {x_k = b_{p+k}} with inward
/// normal -e_k; `offsets()` stores the face positions b_i (0 on lower faces,
/// u_k > 0 on upper faces).
class Domain {
public:
    static Domain orthant(int p);
    static Domain hyperbox(const Eigen::VectorXd& upper);

    DomainKind kind() const noexcept { return kind_; }
    int dim() const noexcept { return p_; }
    int faces() const noexcept { return kind_ == DomainKind::orthant ? p_ : 2 * p_; }

    /// p x b matrix N whose columns are the inward unit normals.
    const Eigen::MatrixXd& normals() const noexcept { return normals_; }
    const Eigen::VectorXd& offsets() const noexcept { return offsets_; }

    /// Coordinate a face constrains.
    int axis(int face) const noexcept { return face % p_; }
    bool is_upper(int face) const noexcept { return face >= p_; }
    /// The parallel face on the other side of the box, or -1.
    int opposite(int face) const noexcept;

    /// Signed distance to face i, positive inside: x_k on lower faces,
    /// b_i - x_k on upper faces.
    double slack(int face, const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd slacks(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    bool contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol = kBoundaryTol) const;
    bool on_face(int face, const Eigen::Ref<const Eigen::VectorXd>& x,
                 double tol = kBoundaryTol) const;

    /// True when the set contains no pair of opposite faces (such sets are
    /// the only ones that can be simultaneously active).
    bool compatible(FaceSet set) const noexcept;
    /// Every nonempty compatible face set, ordered by size then mask.
    std::vector<FaceSet> compatible_sets() const;
    /// The maximal compatible sets: one face per coordinate (the corners).
    std::vector<FaceSet> corners() const;

    /// max over D of sum_j |x_j|; +inf for the orthant.
    double max_l1() const;

private:
    Domain(DomainKind kind, int p, Eigen::VectorXd upper);

    DomainKind kind_;
    int p_;
    Eigen::MatrixXd normals_;
    Eigen::VectorXd offsets_;
};

/// Indices of the set bits of a face set, ascending.
std::vector<int> face_indices(FaceSet set);

}  // namespace skewfb::reflection
