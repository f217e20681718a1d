#pragma once

#include "skewfb/levy/driver.hpp"
#include "skewfb/queueing/queueing.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace skewfb::pde {

/// Uniform tensor grid on [lower, upper]. Node (i_1, ..., i_p) has linear
/// index sum_k i_k stride_k with axis 0 fastest.
class Grid {
public:
    Grid(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> points);

    int dim() const noexcept { return static_cast<int>(points_.size()); }
    Eigen::Index size() const noexcept { return size_; }
    const Eigen::VectorXd& lower() const noexcept { return lower_; }
    const Eigen::VectorXd& upper() const noexcept { return upper_; }
    const Eigen::VectorXd& spacing() const noexcept { return h_; }
    int points(int axis) const { return points_[static_cast<std::size_t>(axis)]; }
    Eigen::Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

    std::vector<int> multi_index(Eigen::Index node) const;
    Eigen::VectorXd point(Eigen::Index node) const;
    bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;
    /// Node at x (within 1e-9 of a spacing), or -1.
    Eigen::Index node_at(const Eigen::VectorXd& x) const;

private:
    Eigen::VectorXd lower_, upper_, h_;
    std::vector<int> points_;
    std::vector<Eigen::Index> strides_;
    Eigen::Index size_ = 0;
};

/// Time slices of a vector field on a grid: values[k] is (nodes x comps),
/// column l holding V_l(times[k], .). Derivatives use central differences
/// in the interior and three-point one-sided formulas on faces.
struct GridField {
    Grid grid;
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> values;

    int components() const { return values.empty() ? 0 : static_cast<int>(values.front().cols()); }

    /// Throws GridError on inconsistent slices, non-increasing times or
    /// non-finite values.
    void validate() const;

    /// Multilinear interpolation of slice k at x. Throws ExtrapolationError
    /// outside the grid.
    Eigen::VectorXd value(std::size_t k, const Eigen::VectorXd& x) const;
    /// Linear in time between bracketing slices.
    Eigen::VectorXd value_at(double t, const Eigen::VectorXd& x) const;

    /// p x comps gradient at a node.
    Eigen::MatrixXd gradient(std::size_t k, Eigen::Index node) const;
    /// Second derivative d^2 V_l / dx_i dx_j at a node, for all l.
    Eigen::VectorXd second(std::size_t k, Eigen::Index node, int i, int j) const;
    /// Gradient at an arbitrary point: nodal gradients interpolated.
    Eigen::MatrixXd gradient_at(double t, const Eigen::VectorXd& x) const;
};

/// Field with one time slice filled from f(x).
GridField sample_field(const Grid& grid, double t, int comps,
                       const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f);

/// Coefficients of the per-player generator. Callables take (t, x, u);
/// empty callables are zero. Player totals (index 0) are sums over players
/// 1..q and are formed internally.
struct HJBCoefficients {
    int p = 1, q = 1, d = 1;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> b;      // p
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> sigma;  // p x d
    /// Jump of component j with mark z (p-vector).
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&, int, double)> eta;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> c;  // q
    /// alpha(t, x, v, u), q x d. v is the field value (players 1..q) at x, so
    /// x-derivatives follow the chain rule through the field.
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>
        alpha;
    /// zeta(t, x, u, j, z), q-vector.
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&, int, double)> zeta;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> gamma;  // b-vector
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> beta;   // q-vector
    Eigen::MatrixXd v;  // p x b reflection directions
    Eigen::MatrixXd s;  // q x q backward regulator directions
    levy::LevyDriver driver;

    void validate() const;
};

struct GeneratorOptions {
    /// Multiply the second-order term by 1/2.
    bool half_laplacian = false;
    /// Clamp jump targets into the grid instead of throwing.
    bool clamp = false;
    int quadrature_nodes = 16;
};

struct GeneratorValue {
    Eigen::VectorXd L;  // (q+1)-vector, index 0 = total
    std::vector<std::string> warnings;
};

/// Evaluates the per-player generator at grid node x of slice k. The field
/// must have q+1 components (column 0 the total). Throws GridError when x
/// is not a node, ExtrapolationError when x + eta leaves the grid and
/// clamping is off.
GeneratorValue hjb_generator_eval(const GridField& field, std::size_t k, const HJBCoefficients& coeffs,
                                  const Eigen::VectorXd& u, const Eigen::VectorXd& x,
                                  const GeneratorOptions& options = {});

/// Prepends the column sum as component 0.
GridField with_total(const GridField& players);

struct Box {
    Eigen::VectorXd lower, upper;  // empty = whole space
    bool bounded() const noexcept { return lower.size() != 0; }
    bool contains(const Eigen::VectorXd& x) const;
};

struct FeynmanKacProblem {
    int p = 1, d = 1;
    std::function<double(double, const Eigen::VectorXd&)> g;  // source; empty = 0
    std::function<double(double, const Eigen::VectorXd&)> H;  // terminal and exit data
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> b;      // empty = 0
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> sigma;  // empty = identity (p = d)
    Box domain;
    double T = 1.0;
};

struct McConfig {
    std::size_t paths = 10000;
    double dt = 0.01;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    /// true: simulate dX = b dt + sigma dW (generator with 1/2). false: the
    /// un-halved generator, i.e. sigma scaled by sqrt(2).
    bool half_laplacian = true;
    /// Mean overshoot past the boundary at exit above which a warning is issued.
    double overshoot_tol = 0.05;
};

struct McEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t paths = 0;
    double exit_fraction = 0.0;
    double mean_overshoot = 0.0;
    std::vector<std::string> warnings;
};

/// E[H(tau, X_tau) + int_t^tau g(s, X_s) ds] with tau the first exit from
/// [0, T] x D. The exit point is the linear crossing point of the last step.
McEstimate feynman_kac_dirichlet_poisson(const FeynmanKacProblem& problem, double t, const Eigen::VectorXd& x,
                                         const McConfig& config);

enum class Mollifier {
    /// Hat function of width one cell, value 1 on the face.
    cell,
    /// Same hat scaled by n' Gamma n / h: the rate at which a grid walk with
    /// this generator accumulates regulator mass while sitting on the face.
    local_time,
};

struct TransitionOptions {
    bool half_laplacian = false;
    Mollifier mollifier = Mollifier::local_time;
    /// Keep every n-th time slice (the t = 0 and t = T slices are always kept).
    std::size_t store_every = 1;
};

/// Explicit backward stepping of V(t) = H + int_t^T K V ds with
/// K V = sum Gamma_ij d_ij V + theta . grad V + sum_i (v_i . grad V) iota_i(x),
/// iota_i the mollified face indicator. The grid must lie in the RBM domain.
/// Throws StabilityError unless dt <= min h^2 / (2 p max Gamma_ii).
GridField rbm_transition_backward(const queueing::RBMSpec& rbm,
                                  const std::function<double(const Eigen::VectorXd&)>& H, const Grid& grid,
                                  double T, double dt, const TransitionOptions& options = {});

struct BridgeOutput {
    std::vector<double> times;
    Eigen::MatrixXd V;                  // (M+1) x comps
    std::vector<Eigen::MatrixXd> Vbar;  // per time: comps x d
    /// Per time and jump component j: comps x marks[j].size().
    std::vector<std::vector<Eigen::MatrixXd>> Vtilde;
    std::vector<std::vector<double>> marks;
};

/// Composes a field with a forward path (rows of X = states at `times`):
///   V_l(t) = V_l(t, X), Vbar_lj = -(alpha_lj + sum_i sigma_ij dV_l/dx_i),
///   Vtilde_lj(z) = -(V_l(X + eta_j(z)) - V_l(X)) - zeta_lj(X + eta_j(z), z).
/// Field component 0 is the total; alpha_0 and zeta_0 are player sums.
/// Marks default to the quadrature nodes of each law. Throws
/// ExtrapolationError when the path leaves the grid.
BridgeOutput spde_bridge(const GridField& field, const std::vector<double>& times, const Eigen::MatrixXd& X,
                         const HJBCoefficients& coeffs,
                         const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& control,
                         std::vector<std::vector<double>> marks = {});

}  // namespace skewfb::pde
