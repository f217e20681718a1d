#include "skewfb/pde/pde.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/parallel.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <random>

namespace skewfb::pde {

namespace {

struct Tap {
    int offset;
    double weight;
};

// First-derivative stencil along an axis with n nodes at position i.
std::vector<Tap> first_stencil(int n, int i, double h) {
    if (n == 2) return i == 0 ? std::vector<Tap>{{0, -1.0 / h}, {1, 1.0 / h}} : std::vector<Tap>{{-1, -1.0 / h}, {0, 1.0 / h}};
    if (i == 0) return {{0, -1.5 / h}, {1, 2.0 / h}, {2, -0.5 / h}};
    if (i == n - 1) return {{0, 1.5 / h}, {-1, -2.0 / h}, {-2, 0.5 / h}};
    return {{-1, -0.5 / h}, {1, 0.5 / h}};
}

std::vector<Tap> second_stencil(int n, int i, double h) {
    const double s = 1.0 / (h * h);
    if (n == 2) return {};
    if (i == 0) return {{0, s}, {1, -2.0 * s}, {2, s}};
    if (i == n - 1) return {{0, s}, {-1, -2.0 * s}, {-2, s}};
    return {{-1, s}, {0, -2.0 * s}, {1, s}};
}

// (node offset, weight) pairs of d^2 / dx_i dx_j at a node.
std::vector<std::pair<Eigen::Index, double>> second_taps(const Grid& g, Eigen::Index node, int i, int j) {
    const std::vector<int> idx = g.multi_index(node);
    std::vector<std::pair<Eigen::Index, double>> out;
    if (i == j) {
        for (const Tap& t : second_stencil(g.points(i), idx[static_cast<std::size_t>(i)], g.spacing()(i))) {
            out.emplace_back(t.offset * g.stride(i), t.weight);
        }
        return out;
    }
    for (const Tap& tj : first_stencil(g.points(j), idx[static_cast<std::size_t>(j)], g.spacing()(j))) {
        for (const Tap& ti : first_stencil(g.points(i), idx[static_cast<std::size_t>(i)], g.spacing()(i))) {
            out.emplace_back(tj.offset * g.stride(j) + ti.offset * g.stride(i), tj.weight * ti.weight);
        }
    }
    return out;
}

std::vector<std::pair<Eigen::Index, double>> first_taps(const Grid& g, Eigen::Index node, int i) {
    const std::vector<int> idx = g.multi_index(node);
    std::vector<std::pair<Eigen::Index, double>> out;
    for (const Tap& t : first_stencil(g.points(i), idx[static_cast<std::size_t>(i)], g.spacing()(i))) {
        out.emplace_back(t.offset * g.stride(i), t.weight);
    }
    return out;
}

// Corner nodes and multilinear weights of the cell containing x.
std::vector<std::pair<Eigen::Index, double>> cell_weights(const Grid& g, const Eigen::VectorXd& x) {
    if (!g.contains(x, 1e-9)) {
        std::string s = "point (";
        for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + std::to_string(x(i));
        throw ExtrapolationError(s + ") lies outside the grid");
    }
    const int p = g.dim();
    std::vector<Eigen::Index> base(static_cast<std::size_t>(p));
    std::vector<double> frac(static_cast<std::size_t>(p));
    for (int k = 0; k < p; ++k) {
        const double r = (x(k) - g.lower()(k)) / g.spacing()(k);
        const int i0 = std::clamp(static_cast<int>(std::floor(r)), 0, g.points(k) - 2);
        base[static_cast<std::size_t>(k)] = i0;
        frac[static_cast<std::size_t>(k)] = std::clamp(r - i0, 0.0, 1.0);
    }
    std::vector<std::pair<Eigen::Index, double>> out;
    for (unsigned corner = 0; corner < (1u << p); ++corner) {
        Eigen::Index node = 0;
        double w = 1.0;
        for (int k = 0; k < p; ++k) {
            const bool up = (corner >> k) & 1u;
            const double f = frac[static_cast<std::size_t>(k)];
            w *= up ? f : 1.0 - f;
            node += (base[static_cast<std::size_t>(k)] + (up ? 1 : 0)) * g.stride(k);
        }
        if (w != 0.0) out.emplace_back(node, w);
    }
    return out;
}

// Bracketing slices and the weight of the later one.
std::pair<std::size_t, double> time_bracket(const std::vector<double>& times, double t) {
    if (times.size() == 1) return {0, 0.0};
    const double span = times.back() - times.front();
    if (t < times.front() - 1e-12 * std::max(1.0, span) || t > times.back() + 1e-12 * std::max(1.0, span)) {
        throw ExtrapolationError("time " + std::to_string(t) + " lies outside the field");
    }
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(std::distance(times.begin(), it) - 1);
    k = std::min(k, times.size() - 2);
    const double w = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
    return {k, w};
}

Eigen::VectorXd with_sum(const Eigen::VectorXd& players) {
    Eigen::VectorXd out(players.size() + 1);
    out(0) = players.sum();
    out.tail(players.size()) = players;
    return out;
}

Eigen::MatrixXd with_sum_rows(const Eigen::MatrixXd& players) {
    Eigen::MatrixXd out(players.rows() + 1, players.cols());
    out.row(0) = players.colwise().sum();
    out.bottomRows(players.rows()) = players;
    return out;
}

Eigen::VectorXd call_or_zero(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>& f,
                             double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::Index n) {
    if (!f) return Eigen::VectorXd::Zero(n);
    Eigen::VectorXd out = f(t, x, u);
    if (out.size() != n) throw DimensionError("coefficient has length " + std::to_string(out.size()) + ", expected " + std::to_string(n));
    return out;
}

Eigen::MatrixXd sigma_of(const HJBCoefficients& c, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    if (!c.sigma) return Eigen::MatrixXd::Zero(c.p, c.d);
    Eigen::MatrixXd s = c.sigma(t, x, u);
    if (s.rows() != c.p || s.cols() != c.d) throw DimensionError("sigma must be p x d");
    return s;
}

Eigen::MatrixXd alpha_of(const HJBCoefficients& c, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& u) {
    if (!c.alpha) return Eigen::MatrixXd::Zero(c.q, c.d);
    Eigen::MatrixXd a = c.alpha(t, x, v, u);
    if (a.rows() != c.q || a.cols() != c.d) throw DimensionError("alpha must be q x d");
    return a;
}

Eigen::VectorXd zeta_of(const HJBCoefficients& c, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u, int j,
                        double z) {
    if (!c.zeta) return Eigen::VectorXd::Zero(c.q);
    Eigen::VectorXd out = c.zeta(t, x, u, j, z);
    if (out.size() != c.q) throw DimensionError("zeta must have length q");
    return out;
}

}  // namespace

// ---------------------------------------------------------------- Grid

Grid::Grid(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<int> points)
    : lower_(std::move(lower)), upper_(std::move(upper)), points_(std::move(points)) {
    const auto p = static_cast<Eigen::Index>(points_.size());
    if (p == 0 || lower_.size() != p || upper_.size() != p) throw DimensionError("grid bounds and point counts must match");
    h_.resize(p);
    size_ = 1;
    for (Eigen::Index k = 0; k < p; ++k) {
        const int n = points_[static_cast<std::size_t>(k)];
        if (n < 2) throw GridError("each axis needs at least two points");
        if (!(upper_(k) > lower_(k))) throw GridError("grid upper bound must exceed the lower bound");
        h_(k) = (upper_(k) - lower_(k)) / (n - 1);
        strides_.push_back(size_);
        size_ *= n;
    }
}

std::vector<int> Grid::multi_index(Eigen::Index node) const {
    std::vector<int> idx(points_.size());
    for (std::size_t k = 0; k < points_.size(); ++k) {
        idx[k] = static_cast<int>(node % points_[k]);
        node /= points_[k];
    }
    return idx;
}

Eigen::VectorXd Grid::point(Eigen::Index node) const {
    const std::vector<int> idx = multi_index(node);
    Eigen::VectorXd x(dim());
    for (int k = 0; k < dim(); ++k) x(k) = lower_(k) + idx[static_cast<std::size_t>(k)] * h_(k);
    return x;
}

bool Grid::contains(const Eigen::VectorXd& x, double tol) const {
    if (x.size() != dim()) return false;
    for (int k = 0; k < dim(); ++k) {
        const double slack = tol * h_(k);
        if (x(k) < lower_(k) - slack || x(k) > upper_(k) + slack) return false;
    }
    return true;
}

Eigen::Index Grid::node_at(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) return -1;
    Eigen::Index node = 0;
    for (int k = 0; k < dim(); ++k) {
        const double r = (x(k) - lower_(k)) / h_(k);
        const double i = std::round(r);
        if (std::abs(r - i) > 1e-9 || i < 0 || i > points(k) - 1) return -1;
        node += static_cast<Eigen::Index>(i) * stride(k);
    }
    return node;
}

// ---------------------------------------------------------------- GridField

void GridField::validate() const {
    if (times.empty() || times.size() != values.size()) throw GridError("one value slice per time");
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k].rows() != grid.size() || values[k].cols() != values.front().cols()) {
            throw GridError("slice " + std::to_string(k) + " has the wrong shape");
        }
        if (!values[k].allFinite()) throw GridError("slice " + std::to_string(k) + " has non-finite values");
        if (k > 0 && !(times[k] > times[k - 1])) throw GridError("field times must increase");
    }
}

Eigen::VectorXd GridField::value(std::size_t k, const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(components());
    for (const auto& [node, w] : cell_weights(grid, x)) out += w * values[k].row(node).transpose();
    return out;
}

Eigen::VectorXd GridField::value_at(double t, const Eigen::VectorXd& x) const {
    const auto [k, w] = time_bracket(times, t);
    if (w == 0.0) return value(k, x);
    return (1.0 - w) * value(k, x) + w * value(k + 1, x);
}

Eigen::MatrixXd GridField::gradient(std::size_t k, Eigen::Index node) const {
    Eigen::MatrixXd G(grid.dim(), components());
    for (int i = 0; i < grid.dim(); ++i) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(components());
        for (const auto& [off, w] : first_taps(grid, node, i)) row += w * values[k].row(node + off);
        G.row(i) = row;
    }
    return G;
}

Eigen::VectorXd GridField::second(std::size_t k, Eigen::Index node, int i, int j) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(components());
    for (const auto& [off, w] : second_taps(grid, node, i, j)) out += w * values[k].row(node + off).transpose();
    return out;
}

Eigen::MatrixXd GridField::gradient_at(double t, const Eigen::VectorXd& x) const {
    const auto [k, w] = time_bracket(times, t);
    const auto cells = cell_weights(grid, x);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(grid.dim(), components());
    for (const auto& [node, cw] : cells) {
        G += cw * (1.0 - w) * gradient(k, node);
        if (w != 0.0) G += cw * w * gradient(k + 1, node);
    }
    return G;
}

GridField sample_field(const Grid& grid, double t, int comps,
                       const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
    GridField field{grid, {t}, {Eigen::MatrixXd(grid.size(), comps)}};
    for (Eigen::Index n = 0; n < grid.size(); ++n) {
        const Eigen::VectorXd v = f(grid.point(n));
        if (v.size() != comps) throw DimensionError("field sampler returned the wrong length");
        field.values[0].row(n) = v.transpose();
    }
    return field;
}

GridField with_total(const GridField& players) {
    GridField out{players.grid, players.times, {}};
    for (const auto& slice : players.values) {
        Eigen::MatrixXd v(slice.rows(), slice.cols() + 1);
        v.col(0) = slice.rowwise().sum();
        v.rightCols(slice.cols()) = slice;
        out.values.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------- generator

void HJBCoefficients::validate() const {
    if (p < 1 || q < 1 || d < 0) throw DimensionError("need p >= 1, q >= 1, d >= 0");
    if (v.size() != 0 && v.rows() != p) throw DimensionError("v must have p rows");
    if (s.size() != 0 && s.rows() != q) throw DimensionError("s must have q rows");
    if (driver.h() > 0) {
        driver.validate();
        if (!eta) throw CoefficientError("jump components need eta");
    }
}

GeneratorValue hjb_generator_eval(const GridField& field, std::size_t k, const HJBCoefficients& c,
                                  const Eigen::VectorXd& u, const Eigen::VectorXd& x, const GeneratorOptions& options) {
    c.validate();
    field.validate();
    const Grid& g = field.grid;
    if (g.dim() != c.p) throw DimensionError("grid dimension differs from p");
    if (field.components() != c.q + 1) throw DimensionError("field needs q + 1 components (total first)");
    if (k >= field.times.size()) throw GridError("slice index out of range");
    const Eigen::Index node = g.node_at(x);
    if (node < 0) throw GridError("evaluation point is not a grid node");

    const double t = field.times[k];
    const Eigen::VectorXd xn = g.point(node);
    const Eigen::VectorXd V = field.values[k].row(node).transpose();
    const Eigen::MatrixXd G = field.gradient(k, node);  // p x (q+1)
    GeneratorValue out;
    Eigen::VectorXd L = Eigen::VectorXd::Zero(c.q + 1);

    const Eigen::MatrixXd sig = sigma_of(c, t, xn, u);
    const Eigen::MatrixXd A = (options.half_laplacian ? 0.5 : 1.0) * sig * sig.transpose();
    for (int i = 0; i < c.p; ++i) {
        for (int j = 0; j < c.p; ++j) {
            if (A(i, j) != 0.0) L += A(i, j) * field.second(k, node, i, j);
        }
    }

    Eigen::VectorXd drift = call_or_zero(c.b, t, xn, u, c.p);
    if (c.gamma && c.v.size() != 0) {
        const Eigen::VectorXd gam = c.gamma(t, xn);
        if (gam.size() != c.v.cols()) throw DimensionError("gamma must have one entry per face");
        drift += c.v * gam;
    }
    L += G.transpose() * drift;

    if (c.alpha) {
        // d alpha_lj / dx_i through the field: evaluate alpha at the stencil
        // nodes with the field's values there.
        for (int i = 0; i < c.p; ++i) {
            Eigen::MatrixXd dA = Eigen::MatrixXd::Zero(c.q, c.d);
            for (const auto& [off, w] : first_taps(g, node, i)) {
                const Eigen::Index m = node + off;
                const Eigen::VectorXd vm = field.values[k].row(m).tail(c.q).transpose();
                dA += w * alpha_of(c, t, g.point(m), vm, u);
            }
            const Eigen::MatrixXd dA_full = with_sum_rows(dA);  // (q+1) x d
            L += dA_full * sig.row(i).transpose();
        }
    }

    L -= with_sum(call_or_zero(c.c, t, xn, u, c.q));

    if (c.beta && c.s.size() != 0) {
        const Eigen::VectorXd bet = c.beta(t, xn);
        if (bet.size() != c.s.cols()) throw DimensionError("beta must match the columns of s");
        L += with_sum(c.s * bet);
    }

    bool clamped = false;
    for (int j = 0; j < c.driver.h(); ++j) {
        const double rate = c.driver.rates[static_cast<std::size_t>(j)];
        const auto& law = c.driver.marks[static_cast<std::size_t>(j)];
        for (const auto& [z, w] : law.quadrature(options.quadrature_nodes)) {
            const Eigen::VectorXd eta = c.eta(t, xn, u, j, z);
            if (eta.size() != c.p) throw DimensionError("eta must have length p");
            Eigen::VectorXd y = xn + eta;
            if (!g.contains(y, 1e-9)) {
                if (!options.clamp) throw ExtrapolationError("x + eta leaves the grid");
                y = y.cwiseMax(g.lower()).cwiseMin(g.upper());
                clamped = true;
            }
            const Eigen::VectorXd Vy = field.value(k, y);
            L -= rate * w * (Vy - V - G.transpose() * eta);
            if (c.zeta) L -= rate * w * with_sum(zeta_of(c, t, y, u, j, z) - zeta_of(c, t, xn, u, j, z));
        }
    }
    if (clamped) out.warnings.push_back("jump targets outside the grid were clamped to its boundary");
    out.L = L;
    return out;
}

// ---------------------------------------------------------------- Feynman-Kac

bool Box::contains(const Eigen::VectorXd& x) const {
    if (!bounded()) return true;
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

McEstimate feynman_kac_dirichlet_poisson(const FeynmanKacProblem& pr, double t, const Eigen::VectorXd& x,
                                         const McConfig& cfg) {
    if (!pr.H) throw ParameterError("terminal data H is required");
    if (x.size() != pr.p) throw DimensionError("start point must have length p");
    if (pr.domain.bounded() && (pr.domain.lower.size() != pr.p || pr.domain.upper.size() != pr.p)) {
        throw DimensionError("domain bounds must have length p");
    }
    if (!pr.sigma && pr.d != pr.p) throw DimensionError("identity diffusion needs d = p");
    if (cfg.paths < 2 || !(cfg.dt > 0.0)) throw ParameterError("need at least two paths and dt > 0");
    if (!pr.domain.contains(x)) throw ParameterError("start point outside the domain");

    McEstimate est;
    est.paths = cfg.paths;
    if (t >= pr.T) {
        est.value = pr.H(t, x);
        return est;
    }
    const auto steps = static_cast<std::size_t>(std::ceil((pr.T - t) / cfg.dt - 1e-9));
    const double h = (pr.T - t) / static_cast<double>(steps);
    const double scale = cfg.half_laplacian ? 1.0 : std::sqrt(2.0);

    std::vector<double> payoff(cfg.paths), overshoot(cfg.paths, 0.0);
    std::vector<char> exited(cfg.paths, 0);
    parallel_for(cfg.paths, cfg.threads, [&](std::size_t path) {
        Rng rng = make_rng(cfg.seed, path);
        std::normal_distribution<double> normal;
        Eigen::VectorXd X = x, Xn(pr.p), xi(pr.d);
        double s = t, integral = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double gk = pr.g ? pr.g(s, X) : 0.0;
            for (int i = 0; i < pr.d; ++i) xi(i) = normal(rng);
            Xn = X;
            if (pr.b) Xn += pr.b(s, X) * h;
            if (pr.sigma) {
                Xn += scale * std::sqrt(h) * (pr.sigma(s, X) * xi);
            } else {
                Xn += scale * std::sqrt(h) * xi;
            }
            if (!pr.domain.contains(Xn)) {
                double theta = 1.0, over = 0.0;
                for (int i = 0; i < pr.p; ++i) {
                    const double lo = pr.domain.lower(i), hi = pr.domain.upper(i);
                    if (Xn(i) < lo) {
                        theta = std::min(theta, (X(i) - lo) / (X(i) - Xn(i)));
                        over = std::max(over, lo - Xn(i));
                    } else if (Xn(i) > hi) {
                        theta = std::min(theta, (hi - X(i)) / (Xn(i) - X(i)));
                        over = std::max(over, Xn(i) - hi);
                    }
                }
                integral += gk * theta * h;
                const Eigen::VectorXd exit = X + theta * (Xn - X);
                payoff[path] = pr.H(s + theta * h, exit) + integral;
                overshoot[path] = over;
                exited[path] = 1;
                return;
            }
            integral += gk * h;
            X = Xn;
            s = t + static_cast<double>(k + 1) * h;
        }
        payoff[path] = pr.H(pr.T, X) + integral;
    });

    const double shift = payoff.front();
    double m = 0.0, m2 = 0.0, over = 0.0;
    std::size_t exits = 0;
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        const double d = payoff[i] - shift;
        m += d;
        m2 += d * d;
        if (exited[i]) {
            ++exits;
            over += overshoot[i];
        }
    }
    const double n = static_cast<double>(cfg.paths);
    m /= n;
    const double var = std::max(0.0, (m2 - n * m * m) / (n - 1.0));
    est.value = shift + m;
    est.se = std::sqrt(var / n);
    est.exit_fraction = static_cast<double>(exits) / n;
    est.mean_overshoot = exits ? over / static_cast<double>(exits) : 0.0;
    if (exits && est.mean_overshoot > cfg.overshoot_tol) {
        est.warnings.push_back("mean exit overshoot " + std::to_string(est.mean_overshoot) + " exceeds " +
                               std::to_string(cfg.overshoot_tol) + "; use a finer dt");
    }
    return est;
}

// ---------------------------------------------------------------- RBM transition

GridField rbm_transition_backward(const queueing::RBMSpec& rbm, const std::function<double(const Eigen::VectorXd&)>& H,
                                  const Grid& grid, double T, double dt, const TransitionOptions& options) {
    rbm.validate();
    const int p = rbm.dim();
    if (grid.dim() != p) throw DimensionError("grid dimension differs from the RBM dimension");
    if (!(T > 0.0) || !(dt > 0.0)) throw ParameterError("T and dt must be positive");
    if (options.store_every == 0) throw ParameterError("store_every must be positive");
    const auto& D = rbm.reflection.domain();
    if (!D.contains(grid.lower()) || !D.contains(grid.upper())) throw GridError("grid must lie inside the RBM domain");

    const Eigen::MatrixXd Gam = (options.half_laplacian ? 0.5 : 1.0) * rbm.Gamma;
    const double hmin = grid.spacing().minCoeff();
    const double limit = hmin * hmin / (2.0 * p * Gam.diagonal().maxCoeff());
    if (dt > limit * (1.0 + 1e-12)) {
        throw StabilityError("dt = " + std::to_string(dt) + " exceeds the explicit-scheme bound " + std::to_string(limit));
    }

    const Eigen::MatrixXd& R = rbm.reflection.matrix();
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index n = 0; n < grid.size(); ++n) {
        const Eigen::VectorXd xn = grid.point(n);
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < p; ++j) {
                if (Gam(i, j) == 0.0) continue;
                for (const auto& [off, w] : second_taps(grid, n, i, j)) trip.emplace_back(n, n + off, Gam(i, j) * w);
            }
        }
        Eigen::VectorXd dir = rbm.theta;
        for (int f = 0; f < rbm.reflection.faces(); ++f) {
            const int axis = D.axis(f);
            const double hk = grid.spacing()(axis);
            const double hat = std::max(0.0, 1.0 - D.slack(f, xn) / hk);
            if (hat == 0.0) continue;
            const double weight = options.mollifier == Mollifier::cell ? hat : hat * Gam(axis, axis) / hk;
            dir += weight * R.col(f);
        }
        for (int i = 0; i < p; ++i) {
            if (dir(i) == 0.0) continue;
            for (const auto& [off, w] : first_taps(grid, n, i)) trip.emplace_back(n, n + off, dir(i) * w);
        }
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> K(grid.size(), grid.size());
    K.setFromTriplets(trip.begin(), trip.end());

    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
    const double h = T / static_cast<double>(steps);
    Eigen::VectorXd V(grid.size());
    for (Eigen::Index n = 0; n < grid.size(); ++n) V(n) = H(grid.point(n));

    GridField out{grid, {}, {}};
    auto keep = [&](std::size_t k) {
        out.times.push_back(static_cast<double>(k) * h);
        out.values.emplace_back(V);
    };
    keep(steps);
    for (std::size_t k = steps; k-- > 0;) {
        V += h * (K * V);
        if (!V.allFinite()) throw StabilityError("non-finite values at step " + std::to_string(k));
        if (k == 0 || k % options.store_every == 0) keep(k);
    }
    out.times.back() = 0.0;
    out.times.front() = T;
    std::reverse(out.times.begin(), out.times.end());
    std::reverse(out.values.begin(), out.values.end());
    return out;
}

// ---------------------------------------------------------------- bridge

BridgeOutput spde_bridge(const GridField& field, const std::vector<double>& times, const Eigen::MatrixXd& X,
                         const HJBCoefficients& c,
                         const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& control,
                         std::vector<std::vector<double>> marks) {
    c.validate();
    field.validate();
    if (field.components() != c.q + 1) throw DimensionError("field needs q + 1 components (total first)");
    if (X.rows() != static_cast<Eigen::Index>(times.size()) || X.cols() != c.p) {
        throw DimensionError("path must have one row of length p per time");
    }
    const int h = c.driver.h();
    if (marks.empty()) {
        for (int j = 0; j < h; ++j) {
            std::vector<double> zs;
            for (const auto& [z, w] : c.driver.marks[static_cast<std::size_t>(j)].quadrature(8)) zs.push_back(z);
            marks.push_back(std::move(zs));
        }
    }
    if (static_cast<int>(marks.size()) != h) throw DimensionError("one mark list per jump component");

    BridgeOutput out;
    out.times = times;
    out.marks = marks;
    out.V.resize(X.rows(), c.q + 1);
    for (Eigen::Index k = 0; k < X.rows(); ++k) {
        const double t = times[static_cast<std::size_t>(k)];
        const Eigen::VectorXd x = X.row(k).transpose();
        const Eigen::VectorXd u = control ? control(t, x) : Eigen::VectorXd();
        const Eigen::VectorXd V = field.value_at(t, x);
        out.V.row(k) = V.transpose();
        const Eigen::MatrixXd G = field.gradient_at(t, x);
        const Eigen::MatrixXd sig = sigma_of(c, t, x, u);
        const Eigen::MatrixXd alpha = with_sum_rows(alpha_of(c, t, x, V.tail(c.q), u));
        out.Vbar.push_back(-(alpha + G.transpose() * sig));
        std::vector<Eigen::MatrixXd> jumps;
        for (int j = 0; j < h; ++j) {
            const auto& zs = marks[static_cast<std::size_t>(j)];
            Eigen::MatrixXd Vt(c.q + 1, static_cast<Eigen::Index>(zs.size()));
            for (std::size_t m = 0; m < zs.size(); ++m) {
                const Eigen::VectorXd eta = c.eta(t, x, u, j, zs[m]);
                if (eta.size() != c.p) throw DimensionError("eta must have length p");
                const Eigen::VectorXd y = x + eta;
                Vt.col(static_cast<Eigen::Index>(m)) =
                    -(field.value_at(t, y) - V) - with_sum(zeta_of(c, t, y, u, j, zs[m]));
            }
            jumps.push_back(std::move(Vt));
        }
        out.Vtilde.push_back(std::move(jumps));
    }
    return out;
}

}  // namespace skewfb::pde
