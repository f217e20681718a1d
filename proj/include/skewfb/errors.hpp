#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skewfb {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorCategory {
    config,     // malformed input documents
    numerical,  // solver / simulation failures
    invariant,  // a checked invariant does not hold
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& what)
        : Error(ErrorCategory::numerical, "dimension error: " + what) {}
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& what)
        : Error(ErrorCategory::numerical, "parameter error: " + what) {}
};

struct NormalizationError : Error {
    explicit NormalizationError(const std::string& what)
        : Error(ErrorCategory::numerical, "normalization error: " + what) {}
};

/// No admissible active set in a per-step complementarity problem.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::ptrdiff_t step = -1)
        : Error(ErrorCategory::numerical,
                step >= 0 ? "LCP infeasible at step " + std::to_string(step) + ": " + what
                          : "LCP infeasible: " + what),
          step_(step) {}

    std::ptrdiff_t step() const noexcept { return step_; }

private:
    std::ptrdiff_t step_;
};

struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& what)
        : Error(ErrorCategory::numerical, "convergence error: " + what) {}
};

struct GridError : Error {
    explicit GridError(const std::string& what)
        : Error(ErrorCategory::numerical, "grid error: " + what) {}
};

struct CoefficientError : Error {
    explicit CoefficientError(const std::string& what)
        : Error(ErrorCategory::numerical, "coefficient error: " + what) {}
};

struct UnsupportedIntegrandError : Error {
    explicit UnsupportedIntegrandError(const std::string& what)
        : Error(ErrorCategory::numerical, "unsupported integrand: " + what) {}
};

struct BoundError : Error {
    explicit BoundError(const std::string& what)
        : Error(ErrorCategory::numerical, "intensity bound exceeded: " + what) {}
};

struct ExtrapolationError : Error {
    explicit ExtrapolationError(const std::string& what)
        : Error(ErrorCategory::numerical, "extrapolation error: " + what) {}
};

struct StabilityError : Error {
    explicit StabilityError(const std::string& what)
        : Error(ErrorCategory::numerical, "stability error: " + what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what)
        : Error(ErrorCategory::config, "config error: " + what) {}
};

struct InvariantViolation : Error {
    explicit InvariantViolation(const std::string& what)
        : Error(ErrorCategory::invariant, "invariant violation: " + what) {}
};

}  // namespace skewfb
