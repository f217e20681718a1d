#pragma once

#include "skewfb/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace skewfb::levy {

/// Jump-size law on (0, inf).
class MarkLaw {
public:
    enum class Kind { exponential, uniform, point };

    static MarkLaw exponential(double mean);
    static MarkLaw uniform(double lo, double hi);
    static MarkLaw point(double m);

    Kind kind() const noexcept { return kind_; }
    double mean() const noexcept;
    double second_moment() const noexcept;
    double sample(Rng& rng) const;

    /// E[alpha + beta z; a <= z <= b] (partial expectation of a linear
    /// function over [a, b], b may be +inf).
    double linear_partial_mean(double alpha, double beta, double a, double b) const;

    /// Nodes and weights with sum w f(z) ~ E f(z): Gauss-Laguerre for the
    /// exponential law, Gauss-Legendre for the uniform law, the atom for a
    /// point mass. Exact for polynomials of degree < 2n.
    std::vector<std::pair<double, double>> quadrature(int n) const;

    double param1() const noexcept { return a_; }
    double param2() const noexcept { return b_; }

private:
    MarkLaw(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
    Kind kind_;
    double a_, b_;  // mean | (lo, hi) | m
};

struct LevyDriver {
    int d = 1;                   // Brownian dimension
    std::vector<double> rates;   // lambda_i > 0, one per jump component
    std::vector<MarkLaw> marks;  // nu_i

    int h() const noexcept { return static_cast<int>(rates.size()); }
    /// Throws ParameterError on invalid rates or mismatched sizes.
    void validate() const;
};

struct Jump {
    std::size_t step = 0;  // jump lands in (t_step, t_{step+1}]
    int component = 0;
    double mark = 0.0;
};

/// One realization of the driving noise on a grid of M steps.
struct PathGrid {
    std::vector<double> times;       // M + 1 points
    Eigen::MatrixXd dW;              // M x d
    std::vector<Jump> jumps;         // ordered by step, then component
    std::vector<std::size_t> first;  // jumps of step k: [first[k], first[k+1])
    Eigen::MatrixXd compensator;     // M x h: lambda_i E[z] dt_k

    std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    double dt(std::size_t k) const { return times[k + 1] - times[k]; }
    std::span<const Jump> jumps_in(std::size_t k) const {
        return {jumps.data() + first[k], first[k + 1] - first[k]};
    }
};

/// Draws Brownian increments and compound-Poisson jumps on `times` from the
/// substream (seed, stream). Throws GridError for non-increasing grids.
PathGrid sample_path_grid(const LevyDriver& driver, const std::vector<double>& times,
                          std::uint64_t seed, std::uint64_t stream = 0);

/// Uniform grid 0, T/M, ..., T.
std::vector<double> uniform_grid(double T, std::size_t M);

/// Jump integrand f(z) with a closed-form compensator.
class Integrand {
public:
    static Integrand zero() { return affine(0.0, 0.0); }
    static Integrand affine(double a, double b);
    /// Piecewise-linear through increasing knots, constant beyond the ends.
    static Integrand tabulated(std::vector<double> knots, std::vector<double> values);
    /// Arbitrary function; evaluable but has no compensator.
    static Integrand opaque(std::function<double(double)> f);

    double operator()(double z) const;
    /// E f(z) under the law; throws UnsupportedIntegrandError for opaque.
    double mean(const MarkLaw& law) const;

private:
    enum class Kind { affine, tabulated, opaque };
    Kind kind_ = Kind::affine;
    double a_ = 0.0, b_ = 0.0;
    std::vector<double> knots_, values_;
    std::function<double(double)> f_;
};

/// Per component i: sum over step-k jumps of f_i(z) - lambda_i dt_k E f_i(z).
Eigen::VectorXd compensated_increment(const PathGrid& grid, const LevyDriver& driver,
                                      std::size_t k, const std::vector<Integrand>& f);

/// CSV with header t,dW_1..dW_d,J_1..J_h,C_1..C_h (one row per step: left
/// time, Brownian increments, summed marks, compensator).
void write_csv(std::ostream& os, const PathGrid& grid);

}  // namespace skewfb::levy
