#pragma once

#include "skewfb/reflection/skorokhod.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace skewfb::reflection {

/// sup over grid points s <= t in [t1, t2] of ||v(t) - v(s)||_inf, i.e. the
/// largest per-coordinate range. Zero when the interval holds < 2 points.
double oscillation(const Eigen::MatrixXd& values, const std::vector<double>& times, double t1,
                   double t2);

/// Oscillation over the row range [first, last] inclusive.
double oscillation_rows(const Eigen::MatrixXd& values, std::size_t first, std::size_t last);

/// inf over partitions 0 = s_0 < ... < s_n = T of [0, T] with every cell
/// longer than delta, breakpoints on grid times, of the largest oscillation
/// over the half-open cells [s_{i-1}, s_i) (the last cell includes T).
/// The path is read as a step function on the grid.
double modulus_of_continuity(const DiscretePath& path, double delta, double T);

struct OscillationViolation {
    std::size_t first = 0;  // grid index of t1
    std::size_t last = 0;   // grid index of t2
    bool in_y = false;      // false: Osc(x) bound, true: Osc(y) bound
    double ratio = 0.0;
};

struct OscillationReport {
    double max_ratio_x = 0.0;
    double max_ratio_y = 0.0;
    std::size_t intervals = 0;
    std::vector<OscillationViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks Osc(x) <= kappa Osc(z) and Osc(y) <= kappa Osc(z) on every grid
/// subinterval. A relative slack of 1e-12 absorbs roundoff. At most
/// `max_recorded` violations are stored (all are counted in the ratios).
OscillationReport check_oscillation_inequality(const RegulatedPath& reg, double kappa,
                                               std::size_t max_recorded = 64);

struct KappaOptions {
    std::size_t steps = 50;
    double safety = 1.5;
};

/// Sampling estimate of the oscillation constant: 1.5 times the largest
/// ratio Osc(x)/Osc(z), Osc(y)/Osc(z) seen over `trials` random
/// piecewise-constant free paths. Throws ParameterError when trials == 0.
double estimate_kappa(const ReflectionSpec& spec, std::size_t trials, std::uint64_t seed,
                      const KappaOptions& options = {});

/// Random piecewise-constant free path starting in the domain, as used by
/// estimate_kappa. Exposed so tests can draw from the same family.
DiscretePath random_step_path(const ReflectionSpec& spec, std::size_t steps, std::uint64_t seed,
                              std::uint64_t stream);

}  // namespace skewfb::reflection
