#include "skewfb/queueing/queueing.hpp"

#include "skewfb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace skewfb::queueing {

using reflection::DiscretePath;
using reflection::RegulatedPath;

namespace {

std::string state_string(double t, const Eigen::VectorXi& q) {
    std::ostringstream os;
    os << "t=" << t << " Q=(";
    for (Eigen::Index i = 0; i < q.size(); ++i) os << (i ? "," : "") << q(i);
    os << ")";
    return os.str();
}

void check_routing(const Eigen::MatrixXd& P, int p) {
    if (P.rows() != p || P.cols() != p) throw DimensionError("routing matrix must be p x p");
    if ((P.array() < 0.0).any() || !P.allFinite()) throw ParameterError("routing entries must be nonnegative");
    if ((P.rowwise().sum().array() > 1.0 + 1e-12).any()) throw ParameterError("routing row sums must be <= 1");
}

std::vector<double> uniform_times(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw ParameterError("T and dt must be positive");
    const auto n = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    std::vector<double> times(n + 1);
    for (std::size_t k = 0; k <= n; ++k) times[k] = std::min(T, static_cast<double>(k) * dt);
    times[n] = T;
    return times;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& G) {
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw ParameterError("Gamma is not positive definite");
    return llt.matrixL();
}

Eigen::VectorXd draw_start(const RBMSpec& spec, Rng& rng) {
    if (spec.initial_samples.rows() == 0) return spec.x0;
    std::uniform_int_distribution<Eigen::Index> pick(0, spec.initial_samples.rows() - 1);
    return spec.initial_samples.row(pick(rng)).transpose();
}

double quantile_sorted(std::vector<double>& v, double level) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(level * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

// Moving-block resample of `n` values drawn from the concatenation of two
// series; blocks never straddle the seam.
std::vector<double> block_resample(const Eigen::VectorXd& a, const Eigen::VectorXd& b, std::size_t n,
                                   std::size_t block, Rng& rng) {
    const auto na = static_cast<std::size_t>(a.size());
    const auto nb = static_cast<std::size_t>(b.size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> out;
    out.reserve(n + block);
    while (out.size() < n) {
        const bool from_a = unif(rng) * static_cast<double>(na + nb) < static_cast<double>(na);
        const Eigen::VectorXd& src = from_a ? a : b;
        const std::size_t len = from_a ? na : nb;
        const std::size_t bl = std::min(block, len);
        std::uniform_int_distribution<std::size_t> start(0, len - bl);
        const std::size_t s = start(rng);
        for (std::size_t j = 0; j < bl && out.size() < n; ++j) out.push_back(src(static_cast<Eigen::Index>(s + j)));
    }
    return out;
}

}  // namespace

BatchLaw BatchLaw::fixed(int k) {
    if (k < 1) throw ParameterError("batch size must be >= 1");
    return BatchLaw(Kind::fixed, k);
}

BatchLaw BatchLaw::geometric(double mean) {
    if (!(mean >= 1.0) || !std::isfinite(mean)) throw ParameterError("geometric batch mean must be >= 1");
    return BatchLaw(Kind::geometric, mean);
}

int BatchLaw::sample(Rng& rng) const {
    if (kind_ == Kind::fixed) return static_cast<int>(value_);
    std::geometric_distribution<int> g(1.0 / value_);
    return 1 + g(rng);
}

QueueNetwork QueueNetwork::constant_rates(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                                          const Eigen::MatrixXd& routing, const Eigen::VectorXi& q0) {
    if (lambda.size() != mu.size() || lambda.size() == 0) throw DimensionError("lambda and mu must match");
    QueueNetwork net;
    net.p = static_cast<int>(lambda.size());
    for (int i = 0; i < net.p; ++i) {
        const double a = lambda(i), d = mu(i);
        net.arrival.push_back([a](double, const Eigen::VectorXi&) { return a; });
        net.service.push_back([d](double, const Eigen::VectorXi&) { return d; });
        net.batches.push_back(BatchLaw::unit());
    }
    net.routing = routing;
    net.intensity_bound = lambda.sum() + mu.sum();
    net.q0 = q0.size() ? q0 : Eigen::VectorXi::Zero(net.p);
    return net;
}

void QueueNetwork::validate() const {
    if (p < 1) throw ParameterError("class count must be positive");
    const auto n = static_cast<std::size_t>(p);
    if (arrival.size() != n || service.size() != n) throw DimensionError("one arrival and one service rate per class");
    if (!batches.empty() && batches.size() != n) throw DimensionError("one batch law per class");
    if (routing.size() != 0) check_routing(routing, p);
    if (!(intensity_bound > 0.0) || !std::isfinite(intensity_bound)) {
        throw ParameterError("intensity bound must be positive and finite");
    }
    if (q0.size() != p) throw DimensionError("q0 must have one entry per class");
    if ((q0.array() < 0).any()) throw ParameterError("q0 must be nonnegative");
}

Eigen::VectorXd QueuePath::throughput() const {
    const double span = T - warmup;
    return totals.departures_after_warmup.cast<double>() / span;
}

QueuePath simulate_queue(const QueueNetwork& net, double T, std::uint64_t seed, std::uint64_t stream,
                         const QueueSimOptions& options) {
    net.validate();
    if (!(T > 0.0)) throw ParameterError("horizon must be positive");
    if (!(options.warmup >= 0.0) || !(options.warmup < T)) throw ParameterError("warmup must lie in [0, T)");
    if (options.sample_dt < 0.0) throw ParameterError("sample_dt must be >= 0");

    const int p = net.p;
    Rng rng = make_rng(seed, stream);
    std::exponential_distribution<double> gap(net.intensity_bound);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    QueuePath out;
    out.T = T;
    out.warmup = options.warmup;
    auto& tot = out.totals;
    tot.external_arrivals.setZero(p);
    tot.routed_arrivals.setZero(p);
    tot.departures.setZero(p);
    tot.departures_after_warmup.setZero(p);

    Eigen::VectorXi q = net.q0;
    Eigen::VectorXd integral = Eigen::VectorXd::Zero(p);
    std::vector<double> ev_times{0.0};
    std::vector<int> ev_states(q.data(), q.data() + p);
    std::vector<double> sm_times;
    std::vector<int> sm_states;
    std::size_t next_sample = 0;

    auto emit_samples = [&](double until, bool inclusive) {
        if (options.sample_dt <= 0.0) return;
        for (;;) {
            const double s = static_cast<double>(next_sample) * options.sample_dt;
            if (s > T * (1.0 + 1e-15) || (inclusive ? s > until : s >= until)) break;
            sm_times.push_back(s);
            sm_states.insert(sm_states.end(), q.data(), q.data() + p);
            ++next_sample;
        }
    };

    std::vector<double> rates(static_cast<std::size_t>(2 * p));
    double t = 0.0;
    for (;;) {
        const double tau = t + gap(rng);
        const double hi = std::min(tau, T);
        const double lo = std::max(t, options.warmup);
        if (hi > lo) integral += q.cast<double>() * (hi - lo);
        if (tau > T) {
            emit_samples(T, true);
            break;
        }
        emit_samples(tau, false);
        t = tau;
        ++tot.proposals;

        double total = 0.0;
        for (int i = 0; i < p; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const double a = net.arrival[ui](t, q);
            const double d = q(i) > 0 ? net.service[ui](t, q) : 0.0;
            if (!(a >= 0.0) || !(d >= 0.0) || !std::isfinite(a) || !std::isfinite(d)) {
                throw ParameterError("intensities must be finite and nonnegative at " + state_string(t, q));
            }
            rates[ui] = a;
            rates[static_cast<std::size_t>(p) + ui] = d;
            total += a + d;
        }
        if (total > net.intensity_bound * (1.0 + 1e-12)) {
            throw BoundError("total intensity " + std::to_string(total) + " > bound " +
                             std::to_string(net.intensity_bound) + " at " + state_string(t, q));
        }
        double u = unif(rng) * net.intensity_bound;
        if (u >= total) continue;
        std::size_t e = 0;
        while (e + 1 < rates.size() && u >= rates[e]) u -= rates[e++];
        // guard against roundoff selecting a zero-rate event
        while (rates[e] == 0.0) --e;

        if (e < static_cast<std::size_t>(p)) {
            const int i = static_cast<int>(e);
            const int k = net.batches.empty() ? 1 : net.batches[e].sample(rng);
            q(i) += k;
            tot.external_arrivals(i) += k;
        } else {
            const int i = static_cast<int>(e) - p;
            q(i) -= 1;
            tot.departures(i) += 1;
            if (t >= options.warmup) tot.departures_after_warmup(i) += 1;
            Eigen::MatrixXd Pt;
            const Eigen::MatrixXd* P = nullptr;
            if (net.routing_fn) {
                Pt = net.routing_fn(t, q);
                check_routing(Pt, p);
                P = &Pt;
            } else if (net.routing.size() != 0) {
                P = &net.routing;
            }
            if (P) {
                double v = unif(rng);
                for (int j = 0; j < p; ++j) {
                    const double pij = (*P)(i, j);
                    if (v < pij) {
                        q(j) += 1;
                        tot.routed_arrivals(j) += 1;
                        break;
                    }
                    v -= pij;
                }
            }
        }
        ++tot.events;
        if (options.record_events) {
            ev_times.push_back(t);
            ev_states.insert(ev_states.end(), q.data(), q.data() + p);
        }
    }

    auto to_path = [p](const std::vector<double>& times, const std::vector<int>& states) {
        DiscretePath path;
        path.times = times;
        path.values.resize(static_cast<Eigen::Index>(times.size()), p);
        for (std::size_t k = 0; k < times.size(); ++k) {
            for (int i = 0; i < p; ++i) {
                path.values(static_cast<Eigen::Index>(k), i) = states[k * static_cast<std::size_t>(p) + static_cast<std::size_t>(i)];
            }
        }
        return path;
    };
    if (options.record_events) out.events = to_path(ev_times, ev_states);
    out.samples = to_path(sm_times, sm_states);
    out.time_average = integral / (T - options.warmup);
    out.q_end = q;
    return out;
}

DiscretePath diffusion_scale(const DiscretePath& path, double horizon, double r, const std::vector<double>& grid) {
    if (!(r > 0.0)) throw ParameterError("scale r must be positive");
    if (path.times.empty()) throw GridError("empty path");
    DiscretePath out;
    out.times = grid;
    out.values.resize(static_cast<Eigen::Index>(grid.size()), path.values.cols());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double s = r * r * grid[k];
        if (s > horizon * (1.0 + 1e-12)) {
            throw GridError("scaled time " + std::to_string(s) + " exceeds the simulated horizon " + std::to_string(horizon));
        }
        if (s < path.times.front()) throw GridError("scaled time precedes the path start");
        auto it = std::upper_bound(path.times.begin(), path.times.end(), s);
        const auto idx = static_cast<Eigen::Index>(std::distance(path.times.begin(), it) - 1);
        out.values.row(static_cast<Eigen::Index>(k)) = path.values.row(idx) / r;
    }
    return out;
}

double heavy_traffic_rate(double mu, double theta_hat, double r) {
    if (!(r > 0.0) || !(mu > 0.0)) throw ParameterError("mu and r must be positive");
    const double lambda = mu - theta_hat / r;
    if (!(lambda > 0.0)) throw ParameterError("heavy-traffic arrival rate is not positive");
    return lambda;
}

void RBMSpec::validate() const {
    const int p = dim();
    if (theta.size() != p) throw DimensionError("theta must have length p");
    if (Gamma.rows() != p || Gamma.cols() != p) throw DimensionError("Gamma must be p x p");
    const double scale = std::max(1.0, Gamma.cwiseAbs().maxCoeff());
    if ((Gamma - Gamma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ParameterError("Gamma must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Gamma);
    if (eig.eigenvalues().minCoeff() <= 0.0) throw ParameterError("Gamma must be positive definite");
    reflection::require_completely_s(reflection);
    const auto& D = reflection.domain();
    if (initial_samples.rows() == 0) {
        if (x0.size() != p) throw DimensionError("x0 must have length p");
        if (!D.contains(x0)) throw ParameterError("x0 must lie in the domain");
    } else {
        if (initial_samples.cols() != p) throw DimensionError("initial samples must have p columns");
        for (Eigen::Index k = 0; k < initial_samples.rows(); ++k) {
            if (!D.contains(initial_samples.row(k).transpose())) throw ParameterError("initial sample outside the domain");
        }
    }
}

RBMSpec mm1_limit(double lambda, double mu) {
    if (!(lambda > 0.0) || !(mu > 0.0)) throw ParameterError("rates must be positive");
    return RBMSpec{Eigen::VectorXd::Constant(1, lambda - mu), Eigen::MatrixXd::Constant(1, 1, lambda + mu),
                   reflection::ReflectionSpec(reflection::Domain::orthant(1), Eigen::MatrixXd::Identity(1, 1)),
                   Eigen::VectorXd::Zero(1), Eigen::MatrixXd()};
}

RegulatedPath simulate_rbm(const RBMSpec& spec, double T, double dt, std::uint64_t seed, std::uint64_t stream) {
    spec.validate();
    const int p = spec.dim();
    const Eigen::MatrixXd L = cholesky_factor(spec.Gamma);
    Rng rng = make_rng(seed, stream);
    std::normal_distribution<double> normal;

    DiscretePath z;
    z.times = uniform_times(T, dt);
    const auto rows = static_cast<Eigen::Index>(z.times.size());
    z.values.resize(rows, p);
    z.values.row(0) = draw_start(spec, rng).transpose();
    Eigen::VectorXd g(p);
    for (Eigen::Index k = 1; k < rows; ++k) {
        const double h = z.times[static_cast<std::size_t>(k)] - z.times[static_cast<std::size_t>(k - 1)];
        for (int i = 0; i < p; ++i) g(i) = normal(rng);
        z.values.row(k) = z.values.row(k - 1) + (spec.theta * h + std::sqrt(h) * (L * g)).transpose();
    }
    return reflection::skorokhod_solve(z, spec.reflection);
}

RbmRun simulate_rbm_long(const RBMSpec& spec, double T, double dt, std::uint64_t seed, std::uint64_t stream,
                         const RbmRunOptions& options) {
    spec.validate();
    if (!(T > 0.0) || !(dt > 0.0)) throw ParameterError("T and dt must be positive");
    if (!(options.warmup >= 0.0) || !(options.warmup < T)) throw ParameterError("warmup must lie in [0, T)");
    if (options.chunk == 0) throw ParameterError("chunk must be positive");
    const int p = spec.dim();
    const int b = spec.reflection.faces();
    const Eigen::MatrixXd L = cholesky_factor(spec.Gamma);
    Rng rng = make_rng(seed, stream);
    std::normal_distribution<double> normal;

    const auto total = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    RbmRun run;
    run.steps = total;
    run.time_average = Eigen::VectorXd::Zero(p);
    run.y_end = Eigen::VectorXd::Zero(b);
    run.complementarity = Eigen::VectorXd::Zero(b);
    run.sample_spacing = static_cast<double>(options.sample_every) * dt;
    std::vector<double> kept;

    Eigen::VectorXd x = draw_start(spec, rng);
    Eigen::VectorXd g(p);
    double averaged_time = 0.0;
    std::size_t done = 0;
    while (done < total) {
        const std::size_t n = std::min(options.chunk, total - done);
        DiscretePath z;
        z.times.resize(n + 1);
        z.values.resize(static_cast<Eigen::Index>(n + 1), p);
        z.values.row(0) = x.transpose();
        for (std::size_t j = 0; j <= n; ++j) z.times[j] = std::min(T, static_cast<double>(done + j) * dt);
        for (std::size_t j = 1; j <= n; ++j) {
            const double h = z.times[j] - z.times[j - 1];
            for (int i = 0; i < p; ++i) g(i) = normal(rng);
            const auto r = static_cast<Eigen::Index>(j);
            z.values.row(r) = z.values.row(r - 1) + (spec.theta * h + std::sqrt(h) * (L * g)).transpose();
        }
        const RegulatedPath reg = reflection::skorokhod_solve(z, spec.reflection);
        const reflection::RegulationCheck chk = reflection::check_regulation(reg, spec.reflection);
        run.regulation_ok = run.regulation_ok && chk.ok();
        run.complementarity += chk.complementarity;
        for (std::size_t j = 0; j < n; ++j) {
            const double t0 = z.times[j];
            const double h = z.times[j + 1] - t0;
            if (t0 >= options.warmup) {
                run.time_average += reg.x.row(static_cast<Eigen::Index>(j)).transpose() * h;
                averaged_time += h;
                if (options.sample_every > 0 && (done + j) % options.sample_every == 0) {
                    const auto row = reg.x.row(static_cast<Eigen::Index>(j));
                    kept.insert(kept.end(), row.data(), row.data() + p);
                }
            }
        }
        run.y_end += reg.y.row(static_cast<Eigen::Index>(n)).transpose();
        x = reg.x.row(static_cast<Eigen::Index>(n)).transpose();
        done += n;
    }
    run.x_end = x;
    if (averaged_time > 0.0) run.time_average /= averaged_time;
    run.samples = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        kept.data(), static_cast<Eigen::Index>(kept.size() / static_cast<std::size_t>(p)), p);
    return run;
}

DiscretePath boundary_time_process(const RegulatedPath& reg, const reflection::ReflectionSpec& spec) {
    const auto& D = spec.domain();
    const int b = spec.faces();
    DiscretePath out;
    out.times = reg.times;
    const auto rows = static_cast<Eigen::Index>(reg.times.size());
    out.values = Eigen::MatrixXd::Zero(rows, b);
    for (Eigen::Index k = 1; k < rows; ++k) {
        const double h = reg.times[static_cast<std::size_t>(k)] - reg.times[static_cast<std::size_t>(k - 1)];
        const Eigen::VectorXd xk = reg.x.row(k - 1).transpose();
        out.values.row(k) = out.values.row(k - 1);
        for (int i = 0; i < b; ++i) {
            if (D.on_face(i, xk)) out.values(k, i) += h;
        }
    }
    return out;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DimensionError("empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

double integrated_autocorrelation(const Eigen::VectorXd& series) {
    const Eigen::Index n = series.size();
    if (n < 2) return 1.0;
    const Eigen::VectorXd c = series.array() - series.mean();
    const double c0 = c.squaredNorm() / static_cast<double>(n);
    if (c0 == 0.0) return 1.0;
    double tau = 1.0;
    for (Eigen::Index lag = 1; lag < n / 2; ++lag) {
        const double ck = c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
        tau += 2.0 * ck / c0;
        if (static_cast<double>(lag) >= 5.0 * tau) break;
    }
    return std::max(tau, 1.0);
}

StationaryReport compare_stationary(const StationarySample& a, const StationarySample& b, const CompareOptions& options) {
    if (a.values.rows() < 2 || b.values.rows() < 2) throw DimensionError("each sample needs at least two rows");
    if (a.values.cols() != b.values.cols()) throw DimensionError("samples have different component counts");
    if (options.bootstrap == 0 || !(options.level > 0.0 && options.level < 1.0)) {
        throw ParameterError("bootstrap count must be positive and level in (0, 1)");
    }
    StationaryReport rep;
    const auto na = static_cast<double>(a.values.rows());
    const auto nb = static_cast<double>(b.values.rows());
    for (Eigen::Index c = 0; c < a.values.cols(); ++c) {
        const Eigen::VectorXd va = a.values.col(c), vb = b.values.col(c);
        ComponentComparison cc;
        cc.mean_a = va.mean();
        cc.mean_b = vb.mean();
        cc.var_a = (va.array() - cc.mean_a).square().sum() / (na - 1.0);
        cc.var_b = (vb.array() - cc.mean_b).square().sum() / (nb - 1.0);
        if (a.spacing > 0.0) cc.tau_a = integrated_autocorrelation(va);
        if (b.spacing > 0.0) cc.tau_b = integrated_autocorrelation(vb);
        cc.se_a = std::sqrt(cc.var_a * cc.tau_a / na);
        cc.se_b = std::sqrt(cc.var_b * cc.tau_b / nb);
        const double gap = std::abs(cc.mean_a - cc.mean_b);
        cc.relative_mean_gap = gap == 0.0 ? 0.0 : (cc.mean_b != 0.0 ? gap / std::abs(cc.mean_b) : std::numeric_limits<double>::infinity());
        auto check_window = [&](const StationarySample& s, double tau, double n, const char* name) {
            if (s.spacing > 0.0 && n < 10.0 * tau) {
                rep.warnings.push_back("component " + std::to_string(c) + ": " + name +
                                       " sample window is shorter than 10 autocorrelation times (tau = " +
                                       std::to_string(tau) + " rows, n = " + std::to_string(static_cast<long long>(n)) +
                                       "); unreliable window");
            }
        };
        check_window(a, cc.tau_a, na, "first");
        check_window(b, cc.tau_b, nb, "second");
        cc.ks = ks_distance(std::vector<double>(va.data(), va.data() + va.size()),
                            std::vector<double>(vb.data(), vb.data() + vb.size()));
        const auto block = static_cast<std::size_t>(std::ceil(2.0 * std::max(cc.tau_a, cc.tau_b)));
        Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(c));
        std::vector<double> null_dist(options.bootstrap);
        for (auto& v : null_dist) {
            v = ks_distance(block_resample(va, vb, static_cast<std::size_t>(na), block, rng),
                            block_resample(va, vb, static_cast<std::size_t>(nb), block, rng));
        }
        cc.ks_critical = quantile_sorted(null_dist, options.level);
        rep.components.push_back(cc);
    }
    return rep;
}

}  // namespace skewfb::queueing
