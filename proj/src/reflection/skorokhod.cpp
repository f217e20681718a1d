#include "skewfb/reflection/skorokhod.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/format.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

namespace skewfb::reflection {

namespace {

constexpr double kDedupTol = 1e-9;

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
    }
    return false;
}

// Solves for the regulator increment that pushes `free_point` back into D.
// Returns nullopt when no compatible active set is admissible.
std::optional<LcpResult> try_jump_lcp(const Eigen::VectorXd& free_point, const ReflectionSpec& spec) {
    const Domain& D = spec.domain();
    const int b = spec.faces();
    const Eigen::VectorXd w0 = D.slacks(free_point);
    const double tol = 1e-12 * std::max(1.0, w0.cwiseAbs().maxCoeff());

    LcpResult out;
    out.bound_constant = spec.increment_bound();
    out.dy = Eigen::VectorXd::Zero(b);
    out.dx = Eigen::VectorXd::Zero(spec.dim());
    if (w0.minCoeff() >= -tol) return out;

    const Eigen::MatrixXd& M = spec.face_matrix();
    const bool stop_at_first = spec.is_p_matrix();
    std::vector<Eigen::VectorXd> found;
    std::vector<FaceSet> found_sets;
    for (FaceSet set : D.compatible_sets()) {
        const auto& inv = spec.block_inverse(set);
        if (!inv) continue;
        const auto idx = face_indices(set);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t r = 0; r < idx.size(); ++r) rhs(r) = -w0(idx[r]);
        const Eigen::VectorXd part = (*inv) * rhs;
        if (part.minCoeff() < -tol) continue;

        Eigen::VectorXd dy = Eigen::VectorXd::Zero(b);
        for (std::size_t r = 0; r < idx.size(); ++r) dy(idx[r]) = std::max(0.0, part(r));
        const Eigen::VectorXd w = w0 + M * dy;
        bool ok = true;
        for (int i = 0; i < b && ok; ++i) {
            if (!(set >> i & 1u) && w(i) < -tol) ok = false;
        }
        if (!ok) continue;

        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const Eigen::VectorXd& f) {
            return (f - dy).cwiseAbs().maxCoeff() <= kDedupTol * std::max(1.0, f.cwiseAbs().maxCoeff());
        });
        if (!duplicate) {
            found.push_back(std::move(dy));
            found_sets.push_back(set);
        }
        if (stop_at_first) break;
    }
    if (found.empty()) return std::nullopt;

    std::size_t best = 0;
    for (std::size_t s = 1; s < found.size(); ++s) {
        if (lex_less(found[s], found[best])) best = s;
    }
    out.dy = found[best];
    out.active = found_sets[best];
    out.unique = found.size() == 1;
    out.dx = spec.matrix() * out.dy;
    return out;
}

void check_grid(const DiscretePath& z, const ReflectionSpec& spec) {
    if (z.values.cols() != spec.dim()) {
        throw DimensionError("free path has " + std::to_string(z.values.cols()) +
                             " columns, domain dimension is " + std::to_string(spec.dim()));
    }
    if (z.times.empty() || static_cast<Eigen::Index>(z.times.size()) != z.values.rows()) {
        throw DimensionError("free path needs one row per grid time");
    }
    for (std::size_t k = 1; k < z.times.size(); ++k) {
        if (!(z.times[k] > z.times[k - 1])) throw GridError("grid times must be strictly increasing");
    }
}

RegulatedPath solve_from(const DiscretePath& z, const Eigen::VectorXd& y_start,
                         const ReflectionSpec& spec) {
    check_grid(z, spec);
    const auto steps = static_cast<Eigen::Index>(z.times.size());
    RegulatedPath out;
    out.times = z.times;
    out.z = z.values;
    out.x.resize(steps, spec.dim());
    out.y.resize(steps, spec.faces());

    const Eigen::MatrixXd& R = spec.matrix();
    Eigen::VectorXd y = y_start;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::VectorXd zk = z.values.row(k).transpose();
        const Eigen::VectorXd free_point = zk + R * y;
        const auto res = try_jump_lcp(free_point, spec);
        if (!res) {
            throw InfeasibleError("no admissible active set (is the reflection completely-S?)", k);
        }
        y += res->dy;
        if (!res->unique) out.nonunique_steps.push_back(static_cast<std::size_t>(k));
        out.y.row(k) = y.transpose();
        out.x.row(k) = (zk + R * y).transpose();
    }
    return out;
}

}  // namespace

LcpResult solve_jump_lcp(const Eigen::VectorXd& x_pre, const Eigen::VectorXd& dz,
                         const ReflectionSpec& spec) {
    if (x_pre.size() != spec.dim() || dz.size() != spec.dim()) {
        throw DimensionError("jump LCP inputs must have the domain dimension");
    }
    auto res = try_jump_lcp(x_pre + dz, spec);
    if (!res) throw InfeasibleError("no admissible active set (is the reflection completely-S?)");
    res->dx += dz;
    return *res;
}

RegulatedPath skorokhod_solve(const DiscretePath& z, const ReflectionSpec& spec) {
    check_grid(z, spec);
    if (!spec.domain().contains(z.values.row(0).transpose())) {
        throw ParameterError("free path must start inside the domain");
    }
    return solve_from(z, Eigen::VectorXd::Zero(spec.faces()), spec);
}

RegulatedPath skorokhod_solve_from(const DiscretePath& z, const Eigen::VectorXd& y_start,
                                   const ReflectionSpec& spec) {
    if (y_start.size() != spec.faces()) throw DimensionError("regulator start has wrong size");
    return solve_from(z, y_start, spec);
}

RegulatedPath skorokhod_fixed_point(const DiscretePath& z, const ReflectionSpec& spec,
                                    const FixedPointOptions& options) {
    check_grid(z, spec);
    const SpectralCertificate cert = spectral_radius_condition(spec);
    if (!cert.holds) {
        throw ParameterError("fixed-point regulation needs rho(|I - N'R|) < 1 on every corner, got " +
                             std::to_string(cert.max_radius));
    }
    const Domain& D = spec.domain();
    if (!D.contains(z.values.row(0).transpose())) {
        throw ParameterError("free path must start inside the domain");
    }

    const auto steps = static_cast<Eigen::Index>(z.times.size());
    const int b = spec.faces();
    const Eigen::MatrixXd& M = spec.face_matrix();
    Eigen::MatrixXd Mo = M;
    Mo.diagonal().setZero();

    // s(k, i): slack of the free path on face i
    Eigen::MatrixXd s(steps, b);
    for (Eigen::Index k = 0; k < steps; ++k) s.row(k) = D.slacks(z.values.row(k).transpose()).transpose();

    const std::size_t cap =
        options.max_iterations > 0 ? options.max_iterations : 10 * static_cast<std::size_t>(std::max<Eigen::Index>(steps - 1, 1));
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(steps, b);
    Eigen::MatrixXd next(steps, b);
    bool converged = false;
    for (std::size_t it = 0; it < cap; ++it) {
        const Eigen::MatrixXd coupling = y * Mo.transpose();  // row k: sum_{j != i} M_ij y_j(t_k)
        for (int i = 0; i < b; ++i) {
            double run = 0.0;
            for (Eigen::Index k = 0; k < steps; ++k) {
                run = std::max(run, -(s(k, i) + coupling(k, i)));
                next(k, i) = run;
            }
        }
        next.row(0).setZero();
        const double diff = (next - y).cwiseAbs().maxCoeff();
        y.swap(next);
        if (diff < options.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw ConvergenceError("fixed-point regulation did not converge in " + std::to_string(cap) +
                               " iterations");
    }

    RegulatedPath out;
    out.times = z.times;
    out.z = z.values;
    out.y = y;
    out.x.resize(steps, spec.dim());
    const Eigen::MatrixXd& R = spec.matrix();
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::VectorXd yk = y.row(k).transpose();
        out.x.row(k) = (z.values.row(k).transpose() + R * yk).transpose();
    }
    return out;
}

bool RegulationCheck::ok() const {
    return in_domain && monotone && starts_at_zero && identity_residual <= kBoundaryTol &&
           (complementarity.size() == 0 || (complementarity.array() == 0.0).all());
}

RegulationCheck check_regulation(const RegulatedPath& path, const ReflectionSpec& spec) {
    const Domain& D = spec.domain();
    const Eigen::Index steps = path.x.rows();
    if (path.y.rows() != steps || path.z.rows() != steps || path.y.cols() != spec.faces() ||
        path.x.cols() != spec.dim() || path.z.cols() != spec.dim()) {
        throw DimensionError("regulated path does not match the reflection spec");
    }
    RegulationCheck r;
    r.complementarity = Eigen::VectorXd::Zero(spec.faces());
    if (steps == 0) return r;
    r.starts_at_zero = (path.y.row(0).array() == 0.0).all();
    const Eigen::MatrixXd& R = spec.matrix();
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::VectorXd xk = path.x.row(k).transpose();
        if (!D.contains(xk)) r.in_domain = false;
        const Eigen::VectorXd yk = path.y.row(k).transpose();
        const Eigen::VectorXd resid = xk - (path.z.row(k).transpose() + R * yk);
        r.identity_residual = std::max(r.identity_residual, resid.cwiseAbs().maxCoeff());
        for (int i = 0; i < spec.faces(); ++i) {
            const double dy = k == 0 ? path.y(0, i) : path.y(k, i) - path.y(k - 1, i);
            if (dy < 0.0) r.monotone = false;
            if (dy > 0.0 && !D.on_face(i, xk)) r.complementarity(i) += dy;
        }
    }
    return r;
}

void write_csv(std::ostream& os, const RegulatedPath& path) {
    os << 't';
    for (Eigen::Index c = 0; c < path.x.cols(); ++c) os << ",x_" << c + 1;
    for (Eigen::Index c = 0; c < path.y.cols(); ++c) os << ",y_" << c + 1;
    os << '\n';
    for (Eigen::Index k = 0; k < path.x.rows(); ++k) {
        os << fmt17(path.times[static_cast<std::size_t>(k)]);
        for (Eigen::Index c = 0; c < path.x.cols(); ++c) os << ',' << fmt17(path.x(k, c));
        for (Eigen::Index c = 0; c < path.y.cols(); ++c) os << ',' << fmt17(path.y(k, c));
        os << '\n';
    }
}

}  // namespace skewfb::reflection
