#include "skewfb/reflection/oscillation.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace skewfb::reflection {

namespace {

// Per-column running min/max over a growing row range.
struct RangeTracker {
    Eigen::VectorXd lo, hi;

    void reset(const Eigen::MatrixXd& v, Eigen::Index row) {
        lo = v.row(row).transpose();
        hi = lo;
    }
    double add(const Eigen::MatrixXd& v, Eigen::Index row) {
        double osc = 0.0;
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            lo(c) = std::min(lo(c), v(row, c));
            hi(c) = std::max(hi(c), v(row, c));
            osc = std::max(osc, hi(c) - lo(c));
        }
        return osc;
    }
};

}  // namespace

double oscillation_rows(const Eigen::MatrixXd& values, std::size_t first, std::size_t last) {
    if (last <= first || static_cast<Eigen::Index>(last) >= values.rows()) return 0.0;
    const auto n = static_cast<Eigen::Index>(last - first + 1);
    const auto block = values.middleRows(static_cast<Eigen::Index>(first), n);
    return (block.colwise().maxCoeff() - block.colwise().minCoeff()).maxCoeff();
}

double oscillation(const Eigen::MatrixXd& values, const std::vector<double>& times, double t1,
                   double t2) {
    if (static_cast<Eigen::Index>(times.size()) != values.rows()) {
        throw DimensionError("oscillation needs one row per grid time");
    }
    const auto first = std::lower_bound(times.begin(), times.end(), t1);
    const auto past = std::upper_bound(times.begin(), times.end(), t2);
    if (first >= past) return 0.0;
    return oscillation_rows(values, static_cast<std::size_t>(first - times.begin()),
                            static_cast<std::size_t>(past - times.begin()) - 1);
}

double modulus_of_continuity(const DiscretePath& path, double delta, double T) {
    if (!(delta > 0.0)) throw ParameterError("modulus of continuity needs delta > 0");
    if (!(delta < T)) throw ParameterError("modulus of continuity needs delta < T");
    const auto& t = path.times;
    if (static_cast<Eigen::Index>(t.size()) != path.values.rows() || t.empty()) {
        throw DimensionError("path needs one row per grid time");
    }
    if (T > t.back() + 1e-12 || t.front() != 0.0) {
        throw ParameterError("path grid must start at 0 and reach T");
    }
    // grid points inside [0, T]
    const auto n = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), T) - t.begin());
    const double inf = std::numeric_limits<double>::infinity();

    // best[j]: optimal max oscillation over [0, t_j) partitioned into cells
    // ending at breakpoint t_j.
    std::vector<double> best(n, inf);
    best[0] = 0.0;
    double answer = inf;
    RangeTracker tr;
    for (std::size_t i = 0; i < n; ++i) {
        if (best[i] == inf) continue;
        tr.reset(path.values, static_cast<Eigen::Index>(i));
        double osc = 0.0;  // oscillation over rows i..j-1
        for (std::size_t j = i + 1; j <= n; ++j) {
            // cell [t_i, t_j) holds rows i..j-1; the closing cell [t_i, T] holds i..n-1
            if (j < n) {
                if (t[j] - t[i] > delta) best[j] = std::min(best[j], std::max(best[i], osc));
                osc = std::max(osc, tr.add(path.values, static_cast<Eigen::Index>(j)));
            } else if (T - t[i] > delta) {
                answer = std::min(answer, std::max(best[i], osc));
            }
        }
    }
    if (answer == inf) throw ParameterError("no admissible partition for this delta on the grid");
    return answer;
}

OscillationReport check_oscillation_inequality(const RegulatedPath& reg, double kappa,
                                               std::size_t max_recorded) {
    const Eigen::Index n = reg.z.rows();
    OscillationReport rep;
    RangeTracker tx, ty, tz;
    for (Eigen::Index i = 0; i < n; ++i) {
        tx.reset(reg.x, i);
        ty.reset(reg.y, i);
        tz.reset(reg.z, i);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double ox = tx.add(reg.x, j);
            const double oy = ty.add(reg.y, j);
            const double oz = tz.add(reg.z, j);
            ++rep.intervals;
            const double slack = 1e-12 * (1.0 + oz);
            auto visit = [&](double o, bool in_y, double& worst) {
                const double ratio =
                    oz > 0.0 ? o / oz : (o > slack ? std::numeric_limits<double>::infinity() : 0.0);
                worst = std::max(worst, ratio);
                if (o > kappa * oz + slack) {
                    if (rep.violations.size() < max_recorded) {
                        rep.violations.push_back({static_cast<std::size_t>(i),
                                                  static_cast<std::size_t>(j), in_y, ratio});
                    }
                }
            };
            visit(ox, false, rep.max_ratio_x);
            visit(oy, true, rep.max_ratio_y);
        }
    }
    return rep;
}

DiscretePath random_step_path(const ReflectionSpec& spec, std::size_t steps, std::uint64_t seed,
                              std::uint64_t stream) {
    const Domain& D = spec.domain();
    const int p = D.dim();
    Rng rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    Eigen::VectorXd width = Eigen::VectorXd::Ones(p);
    if (D.kind() == DomainKind::hyperbox) width = D.offsets().tail(p);

    Eigen::VectorXd x0(p);
    for (int k = 0; k < p; ++k) {
        const double u = unif(rng);
        if (D.kind() == DomainKind::orthant) {
            x0(k) = u < 0.3 ? 0.0 : expo(rng);
        } else if (u < 0.15) {
            x0(k) = 0.0;
        } else if (u < 0.3) {
            x0(k) = width(k);
        } else {
            x0(k) = unif(rng) * width(k);
        }
    }
    Eigen::VectorXd drift(p);
    for (int k = 0; k < p; ++k) drift(k) = 0.5 * normal(rng);
    const double scale = D.kind() == DomainKind::orthant ? 1.0 : 0.25 * width.minCoeff();

    DiscretePath z;
    z.times.resize(steps + 1);
    z.values.resize(static_cast<Eigen::Index>(steps + 1), p);
    z.values.row(0) = x0.transpose();
    z.times[0] = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
        z.times[k] = static_cast<double>(k) / static_cast<double>(steps);
        for (int c = 0; c < p; ++c) {
            const auto r = static_cast<Eigen::Index>(k);
            z.values(r, c) = z.values(r - 1, c) + scale * (drift(c) + normal(rng));
        }
    }
    return z;
}

double estimate_kappa(const ReflectionSpec& spec, std::size_t trials, std::uint64_t seed,
                      const KappaOptions& options) {
    if (trials == 0) throw ParameterError("estimate_kappa needs at least one trial");
    if (options.steps == 0) throw ParameterError("estimate_kappa needs at least one step");
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const RegulatedPath reg = skorokhod_solve(random_step_path(spec, options.steps, seed, t), spec);
        const OscillationReport rep =
            check_oscillation_inequality(reg, std::numeric_limits<double>::infinity(), 0);
        worst = std::max({worst, rep.max_ratio_x, rep.max_ratio_y});
    }
    return options.safety * worst;
}

}  // namespace skewfb::reflection
