#include "config.hpp"

#include "skewfb/errors.hpp"

#include <cmath>

namespace skewfb::cli {

const Json& require(const Json& j, const std::string& key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + key + "'");
    return j.at(key);
}

double number(const Json& j, const std::string& key) {
    const Json& v = require(j, key);
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    return v.get<double>();
}

double number_or(const Json& j, const std::string& key, double fallback) {
    return j.contains(key) ? number(j, key) : fallback;
}

std::size_t count_or(const Json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("'" + key + "' must be a nonnegative integer");
    return v.get<std::size_t>();
}

bool flag_or(const Json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw ConfigError("'" + key + "' must be true or false");
    return j.at(key).get<bool>();
}

Eigen::VectorXd to_vector(const Json& j, const std::string& what) {
    if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
    if (!j.is_array()) throw ConfigError("'" + what + "' must be a number array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("'" + what + "' must contain numbers only");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd to_matrix(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError("'" + what + "' must be an array of rows");
    if (j.empty()) return {};
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("'" + what + "' rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ConfigError("'" + what + "' must contain numbers only");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector_or(const Json& j, const std::string& key, Eigen::VectorXd fallback) {
    return j.contains(key) ? to_vector(j.at(key), key) : fallback;
}

Eigen::MatrixXd matrix_or(const Json& j, const std::string& key, Eigen::MatrixXd fallback) {
    return j.contains(key) ? to_matrix(j.at(key), key) : fallback;
}

reflection::Domain read_domain(const Json& j) {
    const Json& type = require(j, "type");
    if (type == "orthant") {
        const Json& dim = require(j, "dim");
        if (!dim.is_number_integer()) throw ConfigError("domain 'dim' must be an integer");
        return reflection::Domain::orthant(dim.get<int>());
    }
    if (type == "hyperbox") return reflection::Domain::hyperbox(to_vector(require(j, "upper"), "upper"));
    throw ConfigError("domain type must be 'orthant' or 'hyperbox'");
}

reflection::ReflectionSpec read_reflection(const Json& j) {
    reflection::Domain dom = read_domain(require(j, "domain"));
    Eigen::MatrixXd R = matrix_or(j, "R", dom.normals());
    return reflection::ReflectionSpec(std::move(dom), std::move(R));
}

namespace {

levy::MarkLaw read_mark(const Json& j) {
    const Json& law = require(j, "law");
    if (law == "exponential") return levy::MarkLaw::exponential(number(j, "mean"));
    if (law == "uniform") return levy::MarkLaw::uniform(number(j, "lo"), number(j, "hi"));
    if (law == "point") return levy::MarkLaw::point(number(j, "value"));
    throw ConfigError("mark law must be 'exponential', 'uniform' or 'point'");
}

}  // namespace

levy::LevyDriver read_driver(const Json& j) {
    levy::LevyDriver drv;
    drv.d = static_cast<int>(count_or(j, "d", 1));
    if (j.contains("jumps")) {
        for (const Json& jump : j.at("jumps")) {
            drv.rates.push_back(number(jump, "rate"));
            drv.marks.push_back(read_mark(require(jump, "mark")));
        }
    }
    drv.validate();
    return drv;
}

fbsde::AffineForm read_affine(const Json& j) {
    fbsde::AffineForm f;
    f.b0 = vector_or(j, "b0");
    f.bx = matrix_or(j, "bx");
    f.bv = matrix_or(j, "bv");
    f.bu = matrix_or(j, "bu");
    f.sigma = matrix_or(j, "sigma");
    f.eta_a = matrix_or(j, "eta_a");
    f.eta_b = matrix_or(j, "eta_b");
    f.c0 = vector_or(j, "c0");
    f.cx = matrix_or(j, "cx");
    f.cv = matrix_or(j, "cv");
    f.cu = matrix_or(j, "cu");
    f.cuu = matrix_or(j, "cuu");
    f.h0 = vector_or(j, "h0");
    f.hx = matrix_or(j, "hx");
    if (j.contains("terminal")) {
        const Json& t = j.at("terminal");
        if (t == "affine") {
            f.terminal = fbsde::TerminalKind::affine;
        } else if (t == "positive_part") {
            f.terminal = fbsde::TerminalKind::positive_part;
        } else {
            throw ConfigError("terminal must be 'affine' or 'positive_part'");
        }
    }
    f.L = j.contains("L") ? number(j, "L") : fbsde::affine_growth_bound(f);
    return f;
}

fbsde::FBSDEProblem read_problem(const Json& j) {
    fbsde::FBSDEProblem pb;
    pb.T = number(j, "T");
    pb.x0 = to_vector(require(j, "x0"), "x0");
    pb.driver = j.contains("driver") ? read_driver(j.at("driver")) : levy::LevyDriver{};
    const fbsde::AffineForm form = read_affine(require(j, "coefficients"));
    int q = 1;
    if (j.contains("q")) {
        q = static_cast<int>(count_or(j, "q", 1));
    } else if (form.h0.size() > 0) {
        q = static_cast<int>(form.h0.size());
    }
    pb.coeffs = fbsde::affine_coefficients(form, static_cast<int>(pb.x0.size()), q, pb.driver.d, pb.driver.h());
    if (j.contains("forward_reflection")) pb.forward_reflection = read_reflection(j.at("forward_reflection"));
    if (j.contains("backward_reflection")) pb.backward_reflection = read_reflection(j.at("backward_reflection"));
    pb.validate();
    return pb;
}

fbsde::PicardConfig read_picard(const Json& cfg, const Overrides& o) {
    fbsde::PicardConfig c;
    const Json empty = Json::object();
    const Json& j = cfg.contains("picard") ? cfg.at("picard") : empty;
    c.max_iter = static_cast<int>(count_or(j, "max_iter", static_cast<std::size_t>(c.max_iter)));
    c.tol = o.tol.value_or(number_or(j, "tol", c.tol));
    if (j.contains("gamma")) c.gamma = number(j, "gamma");
    c.degree = static_cast<int>(count_or(j, "degree", static_cast<std::size_t>(c.degree)));
    c.derivative_order = static_cast<int>(count_or(j, "derivative_order", 0));
    c.divergence_window = static_cast<int>(count_or(j, "divergence_window", 3));
    c.paths = resolve_paths(cfg, o, c.paths);
    c.dt = resolve_dt(cfg, o, c.dt);
    c.seed = resolve_seed(cfg, o);
    c.threads = resolve_threads(cfg, o);
    if (c.max_iter < 1 || c.degree < 0 || c.derivative_order > 2) throw ConfigError("invalid picard settings");
    return c;
}

ScalarFn read_scalar_fn(const Json& j, int p, const std::string& what) {
    if (j.is_number()) {
        const double c = j.get<double>();
        return [c](double, const Eigen::VectorXd&) { return c; };
    }
    const Json& type = require(j, "type");
    if (type == "quadratic") {
        const double c = number_or(j, "constant", 0.0);
        const double k = number_or(j, "time", 0.0);
        const Eigen::VectorXd lin = vector_or(j, "linear", Eigen::VectorXd::Zero(p));
        const Eigen::MatrixXd Q = matrix_or(j, "quadratic", Eigen::MatrixXd::Zero(p, p));
        if (lin.size() != p || Q.rows() != p || Q.cols() != p) throw ConfigError("'" + what + "' has wrong dimensions");
        return [=](double t, const Eigen::VectorXd& x) { return c + k * t + lin.dot(x) + x.dot(Q * x); };
    }
    if (type == "bump") {
        const Eigen::VectorXd center = to_vector(require(j, "center"), "center");
        const double w = number(j, "width");
        const double a = number_or(j, "height", 1.0);
        if (center.size() != p) throw ConfigError("'" + what + "' center has wrong dimension");
        if (!(w > 0.0)) throw ConfigError("'" + what + "' width must be positive");
        return [=](double, const Eigen::VectorXd& x) { return a * std::exp(-(x - center).squaredNorm() / (2.0 * w * w)); };
    }
    throw ConfigError("'" + what + "' type must be 'quadratic' or 'bump'");
}

std::uint64_t resolve_seed(const Json& cfg, const Overrides& o) {
    if (o.seed) return *o.seed;
    if (cfg.contains("seed")) {
        const Json& s = cfg.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw ConfigError("seed must be a nonnegative integer");
        }
        return s.get<std::uint64_t>();
    }
    throw ConfigError("a seed is required (config 'seed' or --seed)");
}

std::size_t resolve_paths(const Json& cfg, const Overrides& o, std::size_t fallback) {
    const std::size_t n = o.paths.value_or(count_or(cfg, "paths", fallback));
    if (n == 0) throw ConfigError("path count must be positive");
    return n;
}

double resolve_dt(const Json& cfg, const Overrides& o, double fallback) {
    const double dt = o.dt.value_or(number_or(cfg, "dt", fallback));
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    return dt;
}

unsigned resolve_threads(const Json& cfg, const Overrides& o) {
    const auto t = o.threads.value_or(static_cast<unsigned>(count_or(cfg, "threads", 1)));
    if (t == 0) throw ConfigError("thread count must be positive");
    return t;
}

}  // namespace skewfb::cli
