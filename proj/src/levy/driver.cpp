#include "skewfb/levy/driver.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>

namespace skewfb::levy {

namespace {

// Golub-Welsch: nodes/weights from a symmetric tridiagonal Jacobi matrix.
std::vector<std::pair<double, double>> golub_welsch(const Eigen::VectorXd& diag,
                                                    const Eigen::VectorXd& off, double mu0) {
    const auto n = diag.size();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    J.diagonal() = diag;
    for (Eigen::Index i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = off(i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<std::pair<double, double>> out;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = es.eigenvectors()(0, i);
        out.emplace_back(es.eigenvalues()(i), mu0 * v * v);
    }
    return out;
}

}  // namespace

MarkLaw MarkLaw::exponential(double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw ParameterError("exponential mark mean must be positive");
    return {Kind::exponential, mean, 0.0};
}

MarkLaw MarkLaw::uniform(double lo, double hi) {
    if (!(lo >= 0.0 && hi > lo) || !std::isfinite(hi)) {
        throw ParameterError("uniform marks need 0 <= lo < hi < inf");
    }
    return {Kind::uniform, lo, hi};
}

MarkLaw MarkLaw::point(double m) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ParameterError("point-mass mark must be positive");
    return {Kind::point, m, 0.0};
}

double MarkLaw::mean() const noexcept {
    switch (kind_) {
        case Kind::exponential: return a_;
        case Kind::uniform: return 0.5 * (a_ + b_);
        case Kind::point: return a_;
    }
    return 0.0;
}

double MarkLaw::second_moment() const noexcept {
    switch (kind_) {
        case Kind::exponential: return 2.0 * a_ * a_;
        case Kind::uniform: return (a_ * a_ + a_ * b_ + b_ * b_) / 3.0;
        case Kind::point: return a_ * a_;
    }
    return 0.0;
}

double MarkLaw::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::exponential: return std::exponential_distribution<double>(1.0 / a_)(rng);
        case Kind::uniform: return std::uniform_real_distribution<double>(a_, b_)(rng);
        case Kind::point: return a_;
    }
    return 0.0;
}

double MarkLaw::linear_partial_mean(double alpha, double beta, double a, double b) const {
    if (!(b > a)) return 0.0;
    switch (kind_) {
        case Kind::exponential: {
            const double mu = a_;
            a = std::max(a, 0.0);
            if (!(b > a)) return 0.0;
            // antiderivative of (alpha + beta z) e^{-z/mu} / mu
            auto F = [&](double z) {
                if (std::isinf(z)) return 0.0;
                return -std::exp(-z / mu) * (alpha + beta * (z + mu));
            };
            return F(b) - F(a);
        }
        case Kind::uniform: {
            const double lo = std::max(a, a_), hi = std::min(b, b_);
            if (!(hi > lo)) return 0.0;
            return (alpha * (hi - lo) + 0.5 * beta * (hi * hi - lo * lo)) / (b_ - a_);
        }
        case Kind::point:
            return (a_ >= a && a_ <= b) ? alpha + beta * a_ : 0.0;
    }
    return 0.0;
}

std::vector<std::pair<double, double>> MarkLaw::quadrature(int n) const {
    if (n < 1) throw ParameterError("quadrature needs at least one node");
    if (kind_ == Kind::point) return {{a_, 1.0}};
    Eigen::VectorXd diag(n), off(std::max(n - 1, 0));
    if (kind_ == Kind::exponential) {
        for (int k = 0; k < n; ++k) diag(k) = 2.0 * k + 1.0;
        for (int k = 1; k < n; ++k) off(k - 1) = k;
        auto q = golub_welsch(diag, off, 1.0);
        for (auto& [z, w] : q) z *= a_;
        return q;
    }
    diag.setZero();
    for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    auto q = golub_welsch(diag, off, 2.0);
    for (auto& [z, w] : q) {
        z = 0.5 * (a_ + b_) + 0.5 * (b_ - a_) * z;
        w *= 0.5;
    }
    return q;
}

void LevyDriver::validate() const {
    if (d < 0) throw ParameterError("Brownian dimension must be nonnegative");
    if (rates.size() != marks.size()) throw ParameterError("one mark law per jump component required");
    for (double r : rates) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("jump rates must be positive and finite");
    }
}

std::vector<double> uniform_grid(double T, std::size_t M) {
    if (!(T > 0.0) || M == 0) throw GridError("uniform grid needs T > 0 and M >= 1");
    std::vector<double> t(M + 1);
    for (std::size_t k = 0; k <= M; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(M);
    t[M] = T;
    return t;
}

PathGrid sample_path_grid(const LevyDriver& driver, const std::vector<double>& times,
                          std::uint64_t seed, std::uint64_t stream) {
    driver.validate();
    if (times.size() < 2) throw GridError("path grid needs at least two times");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) throw GridError("time steps must be positive");
    }
    const std::size_t M = times.size() - 1;
    const int h = driver.h();
    PathGrid g;
    g.times = times;
    g.dW.resize(static_cast<Eigen::Index>(M), driver.d);
    g.compensator.resize(static_cast<Eigen::Index>(M), h);
    g.first.resize(M + 1);

    Rng rng = make_rng(seed, stream);
    std::normal_distribution<double> n01;
    for (std::size_t k = 0; k < M; ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        const double dt = times[k + 1] - times[k];
        const double sd = std::sqrt(dt);
        g.first[k] = g.jumps.size();
        for (int j = 0; j < driver.d; ++j) g.dW(r, j) = sd * n01(rng);
        for (int i = 0; i < h; ++i) {
            const double lam = driver.rates[static_cast<std::size_t>(i)] * dt;
            const MarkLaw& law = driver.marks[static_cast<std::size_t>(i)];
            g.compensator(r, i) = lam * law.mean();
            const long count = std::poisson_distribution<long>(lam)(rng);
            for (long c = 0; c < count; ++c) g.jumps.push_back({k, i, law.sample(rng)});
        }
    }
    g.first[M] = g.jumps.size();
    return g;
}

Integrand Integrand::affine(double a, double b) {
    Integrand f;
    f.kind_ = Kind::affine;
    f.a_ = a;
    f.b_ = b;
    return f;
}

Integrand Integrand::tabulated(std::vector<double> knots, std::vector<double> values) {
    if (knots.empty() || knots.size() != values.size()) {
        throw ParameterError("tabulated integrand needs matching nonempty knots and values");
    }
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (!(knots[i] > knots[i - 1])) throw ParameterError("tabulated knots must increase");
    }
    Integrand f;
    f.kind_ = Kind::tabulated;
    f.knots_ = std::move(knots);
    f.values_ = std::move(values);
    return f;
}

Integrand Integrand::opaque(std::function<double(double)> fn) {
    Integrand f;
    f.kind_ = Kind::opaque;
    f.f_ = std::move(fn);
    return f;
}

double Integrand::operator()(double z) const {
    switch (kind_) {
        case Kind::affine: return a_ + b_ * z;
        case Kind::opaque: return f_(z);
        case Kind::tabulated: {
            if (z <= knots_.front()) return values_.front();
            if (z >= knots_.back()) return values_.back();
            const auto it = std::upper_bound(knots_.begin(), knots_.end(), z);
            const auto i = static_cast<std::size_t>(it - knots_.begin());
            const double w = (z - knots_[i - 1]) / (knots_[i] - knots_[i - 1]);
            return (1.0 - w) * values_[i - 1] + w * values_[i];
        }
    }
    return 0.0;
}

double Integrand::mean(const MarkLaw& law) const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
        case Kind::affine: return a_ + b_ * law.mean();
        case Kind::opaque:
            throw UnsupportedIntegrandError("opaque integrand has no closed-form compensator");
        case Kind::tabulated: {
            double m = law.linear_partial_mean(values_.front(), 0.0, -inf, knots_.front());
            for (std::size_t i = 1; i < knots_.size(); ++i) {
                const double slope = (values_[i] - values_[i - 1]) / (knots_[i] - knots_[i - 1]);
                // the point law sits on at most one knot; avoid counting it twice
                const double lo = law.kind() == MarkLaw::Kind::point ? std::nextafter(knots_[i - 1], inf)
                                                                     : knots_[i - 1];
                m += law.linear_partial_mean(values_[i - 1] - slope * knots_[i - 1], slope, lo, knots_[i]);
            }
            const double lo = law.kind() == MarkLaw::Kind::point ? std::nextafter(knots_.back(), inf)
                                                                 : knots_.back();
            m += law.linear_partial_mean(values_.back(), 0.0, lo, inf);
            return m;
        }
    }
    return 0.0;
}

Eigen::VectorXd compensated_increment(const PathGrid& grid, const LevyDriver& driver,
                                      std::size_t k, const std::vector<Integrand>& f) {
    const int h = driver.h();
    if (static_cast<int>(f.size()) != h) throw DimensionError("one integrand per jump component required");
    if (k >= grid.steps()) throw GridError("step index out of range");
    Eigen::VectorXd out(h);
    const double dt = grid.dt(k);
    for (int i = 0; i < h; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        out(i) = -driver.rates[ui] * dt * f[ui].mean(driver.marks[ui]);
    }
    for (const Jump& j : grid.jumps_in(k)) out(j.component) += f[static_cast<std::size_t>(j.component)](j.mark);
    return out;
}

void write_csv(std::ostream& os, const PathGrid& grid) {
    const auto d = grid.dW.cols();
    const auto h = grid.compensator.cols();
    os << 't';
    for (Eigen::Index j = 0; j < d; ++j) os << ",dW_" << j + 1;
    for (Eigen::Index i = 0; i < h; ++i) os << ",J_" << i + 1;
    for (Eigen::Index i = 0; i < h; ++i) os << ",C_" << i + 1;
    os << '\n';
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        Eigen::VectorXd sums = Eigen::VectorXd::Zero(h);
        for (const Jump& j : grid.jumps_in(k)) sums(j.component) += j.mark;
        os << fmt17(grid.times[k]);
        for (Eigen::Index j = 0; j < d; ++j) os << ',' << fmt17(grid.dW(r, j));
        for (Eigen::Index i = 0; i < h; ++i) os << ',' << fmt17(sums(i));
        for (Eigen::Index i = 0; i < h; ++i) os << ',' << fmt17(grid.compensator(r, i));
        os << '\n';
    }
}

}  // namespace skewfb::levy
