#pragma once

#include "skewfb/fbsde/regression.hpp"
#include "skewfb/levy/driver.hpp"
#include "skewfb/reflection/skorokhod.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace skewfb::fbsde {

/// Arguments every coefficient is evaluated at. `vbar` is q x d; `vtilde`
/// is q x h and holds the coefficients of the linear-in-z jump field
/// vtilde_j(z) = vtilde(:, j) * z.
struct Args {
    double t;
    const Eigen::VectorXd& x;
    const Eigen::VectorXd& v;
    const Eigen::MatrixXd& vbar;
    const Eigen::MatrixXd& vtilde;
    const Eigen::VectorXd& u;
};

/// Jump coefficient affine in the mark: column j of A + B z_j.
struct AffineJump {
    Eigen::MatrixXd A, B;
};

using VecFn = std::function<Eigen::VectorXd(const Args&)>;
using MatFn = std::function<Eigen::MatrixXd(const Args&)>;
using JumpFn = std::function<AffineJump(const Args&)>;
using TerminalFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;
using ControlFn = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)>;

/// Coefficients of the coupled system
///   dX = b dt + sigma dW + int eta dN~ + R dY,
///   dV = -(A_c V + c) dt + Vbar dW + int Vtilde dN~ - S dF,  V(T) = H(X(T)).
/// The backward martingale integrands are the fields (Vbar, Vtilde)
/// themselves. `c_linear` (A_c) is the part of the driver that is linear in
/// v; it is integrated exactly over each step.
struct CoefficientSet {
    int q = 1;
    VecFn b;
    MatFn sigma;
    JumpFn eta;               // optional; absent means no forward jumps
    VecFn c;                  // optional; absent means zero
    Eigen::MatrixXd c_linear; // q x q, empty means zero
    TerminalFn H;
    ControlFn u;                         // optional; absent means empty control
    std::function<double(double)> L;     // growth bound L(t)
};

struct FBSDEProblem {
    CoefficientSet coeffs;
    std::optional<reflection::ReflectionSpec> forward_reflection;
    std::optional<reflection::ReflectionSpec> backward_reflection;  // (D-bar, S)
    levy::LevyDriver driver;
    double T = 1.0;
    Eigen::VectorXd x0;

    int p() const noexcept { return static_cast<int>(x0.size()); }
    int q() const noexcept { return coeffs.q; }
    int d() const noexcept { return driver.d; }
    int h() const noexcept { return driver.h(); }
    int b() const noexcept { return forward_reflection ? forward_reflection->faces() : 0; }
    int bbar() const noexcept { return backward_reflection ? backward_reflection->faces() : 0; }
    /// Throws on inconsistent dimensions, missing coefficients or x0 outside D.
    void validate() const;
};

/// Per-path arrays; column k is the value at grid time t_k.
struct ForwardPath {
    Eigen::MatrixXd X;  // p x (M+1)
    Eigen::MatrixXd Y;  // b x (M+1)
    std::vector<std::size_t> nonunique_steps;
};

struct BackwardFields {
    Eigen::MatrixXd V;       // q x (M+1)
    Eigen::MatrixXd Vbar;    // (q*d) x (M+1), column-major q x d per column
    Eigen::MatrixXd Vtilde;  // (q*h) x (M+1), column-major q x h per column
    Eigen::MatrixXd F;       // bbar x (M+1)

    static BackwardFields zeros(int q, int d, int h, int bbar, std::size_t steps);
};

struct LsmcOptions {
    int degree = 3;
    unsigned threads = 1;
};

struct BackwardEnsemble {
    std::vector<BackwardFields> fields;
    /// Fit of the value at each step t_k as a function of X(t_k) (k < M).
    std::vector<PolyFit> value_fits;
    std::vector<double> r2;  // per step, mean over value components
    std::vector<std::string> warnings;
    Eigen::VectorXd v0;     // ensemble mean of V(0)
    Eigen::VectorXd v0_se;  // standard error of the pathwise V(0) estimator
    Eigen::MatrixXd v0_paths;  // q x N pathwise V(0) estimates
};

/// Reflected explicit Euler step per grid interval; frozen backward inputs
/// are read from `frozen` column k (empty matrices mean zero).
ForwardPath simulate_forward(const FBSDEProblem& problem, const levy::PathGrid& grid,
                             const BackwardFields& frozen);

/// Least-squares Monte Carlo backward recursion on a fixed forward ensemble.
BackwardEnsemble solve_backward_lsmc(const FBSDEProblem& problem,
                                     const std::vector<levy::PathGrid>& grids,
                                     const std::vector<ForwardPath>& forward,
                                     const LsmcOptions& options = {});

/// Weight xi(c) = 1 / ((c^10)! * eta(c)! * e^c) with eta(c) = (max_D sum|x_j|)^c,
/// evaluated in log space; 0 when D is unbounded.
double derivative_weight(int order, double max_l1);

struct PicardDiagnostics {
    int iterations = 0;
    std::vector<double> norms;  // norm of Xi^n - Xi^{n-1}, n = 2, 3, ...
    double gamma = 0.0;
    int derivative_order = 0;
    std::vector<double> xi;  // xi(0..derivative_order)
    bool converged = false;
    bool diverged = false;
    std::vector<std::string> warnings;
};

struct EnsembleSolution {
    std::vector<double> times;
    std::vector<ForwardPath> forward;
    BackwardEnsemble backward;
    PicardDiagnostics diagnostics;
};

struct PicardConfig {
    int max_iter = 20;
    double tol = 1e-10;
    std::optional<double> gamma;  // default 1 / (2 L^2 T), L = sup L(t)
    std::size_t paths = 1000;
    double dt = 0.01;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    int degree = 3;
    int derivative_order = 0;  // 0..2
    int divergence_window = 3;
};

struct NormOptions {
    double gamma = 0.0;
    int derivative_order = 0;
    double max_l1 = 0.0;  // max_D sum |x_j|, for the derivative weights
};

/// Monte Carlo estimate of
///   E[sup_t (|dX|^2 + |dV|^2) e^{2 gamma t}]
///   + E[int (|dVbar|^2 + |dVtilde|_nu^2) e^{2 gamma t} dt]
/// with |.| the largest absolute entry and |w|_nu^2 = sum_j lambda_j E z^2 max_l w_lj^2.
/// Optional derivative terms add xi(c) E[sup_t |D^c dV(t, X(t))|^2 e^{2 gamma t}]
/// from finite differences of the value fits. Throws GridError on mismatch.
double weighted_norm(const EnsembleSolution& a, const EnsembleSolution& b,
                     const levy::LevyDriver& driver, const NormOptions& options);

/// Sample drivers for `paths` paths on a uniform grid with step close to dt.
std::vector<levy::PathGrid> sample_drivers(const FBSDEProblem& problem, std::size_t paths, double dt,
                                           std::uint64_t seed, unsigned threads = 1);

/// Alternates forward and backward solves on one driver realization,
/// starting from zero backward fields.
EnsembleSolution picard_iterate(const FBSDEProblem& problem, const PicardConfig& config);
EnsembleSolution picard_iterate(const FBSDEProblem& problem, const PicardConfig& config,
                                const std::vector<levy::PathGrid>& grids);

struct ValidationReport {
    double terminal_residual = 0.0;
    Eigen::VectorXd forward_complementarity;   // per face, summed over paths
    Eigen::VectorXd backward_complementarity;  // per face of D-bar
    bool forward_monotone = true;
    bool backward_monotone = true;
    bool forward_in_domain = true;
    bool backward_in_domain = true;
    std::size_t growth_checks = 0;
    std::size_t growth_violations = 0;
    double worst_growth_ratio = 0.0;  // max |f| / (L (1 + |x| + |v| + |vbar| + |vtilde|_nu))
    std::vector<std::string> findings;
    bool ok() const;
};

ValidationReport validate_solution(const FBSDEProblem& problem, const EnsembleSolution& solution);

}  // namespace skewfb::fbsde
