#pragma once

#include "skewfb/fbsde/fbsde.hpp"
#include "skewfb/fbsde/forms.hpp"
#include "skewfb/levy/driver.hpp"
#include "skewfb/reflection/reflection_spec.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace skewfb::cli {

using Json = nlohmann::json;

/// Command-line overrides; all optional.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::optional<double> tol;
    std::optional<unsigned> threads;
};

const Json& require(const Json& j, const std::string& key);
double number(const Json& j, const std::string& key);
double number_or(const Json& j, const std::string& key, double fallback);
std::size_t count_or(const Json& j, const std::string& key, std::size_t fallback);
bool flag_or(const Json& j, const std::string& key, bool fallback);

/// A number or an array of numbers.
Eigen::VectorXd to_vector(const Json& j, const std::string& what);
/// Array of rows. An empty array is an empty matrix.
Eigen::MatrixXd to_matrix(const Json& j, const std::string& what);
Eigen::VectorXd vector_or(const Json& j, const std::string& key, Eigen::VectorXd fallback = {});
Eigen::MatrixXd matrix_or(const Json& j, const std::string& key, Eigen::MatrixXd fallback = {});

/// {"type": "orthant", "dim": p} or {"type": "hyperbox", "upper": [...]}.
reflection::Domain read_domain(const Json& j);
/// {"domain": ..., "R": [[...]]}; R defaults to the inward normals.
reflection::ReflectionSpec read_reflection(const Json& j);
/// {"d": 1, "jumps": [{"rate": r, "mark": {"law": "exponential", "mean": m}}]}.
levy::LevyDriver read_driver(const Json& j);
fbsde::AffineForm read_affine(const Json& j);
/// Coupled problem from "T", "x0", "q", "driver", "coefficients" and the
/// optional "forward_reflection" / "backward_reflection" blocks.
fbsde::FBSDEProblem read_problem(const Json& j);
fbsde::PicardConfig read_picard(const Json& j, const Overrides& o);

/// Scalar function of (t, x): a number, or
///   {"type": "quadratic", "constant": c, "linear": [..], "quadratic": [[..]], "time": k}
///   {"type": "bump", "center": [..], "width": w, "height": a}
using ScalarFn = std::function<double(double, const Eigen::VectorXd&)>;
ScalarFn read_scalar_fn(const Json& j, int p, const std::string& what);

/// Master seed from --seed or the config's "seed"; ConfigError when neither.
std::uint64_t resolve_seed(const Json& cfg, const Overrides& o);
std::size_t resolve_paths(const Json& cfg, const Overrides& o, std::size_t fallback);
double resolve_dt(const Json& cfg, const Overrides& o, double fallback);
unsigned resolve_threads(const Json& cfg, const Overrides& o);

}  // namespace skewfb::cli
