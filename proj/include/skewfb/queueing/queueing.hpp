#pragma once

#include "skewfb/reflection/skorokhod.hpp"
#include "skewfb/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace skewfb::queueing {

/// Intensity as a function of time and the current queue vector.
using RateFn = std::function<double(double t, const Eigen::VectorXi& q)>;
/// Routing matrix P(t, Q): row j holds the probabilities that a customer
/// finishing service at class j joins class i. Row sums <= 1; the rest leaves.
using RoutingFn = std::function<Eigen::MatrixXd(double t, const Eigen::VectorXi& q)>;

/// Integer batch size of an arrival event.
class BatchLaw {
public:
    static BatchLaw unit() { return BatchLaw(Kind::fixed, 1.0); }
    static BatchLaw fixed(int k);
    /// Geometric on {1, 2, ...} with the given mean (>= 1).
    static BatchLaw geometric(double mean);

    int sample(Rng& rng) const;
    double mean() const noexcept { return value_; }

private:
    enum class Kind { fixed, geometric };
    BatchLaw(Kind kind, double value) : kind_(kind), value_(value) {}
    Kind kind_;
    double value_;
};

struct QueueNetwork {
    int p = 1;
    std::vector<RateFn> arrival;  // a_i
    std::vector<RateFn> service;  // d_i; forced to 0 while Q_i = 0
    std::vector<BatchLaw> batches;
    Eigen::MatrixXd routing;  // constant P (p x p); empty = no routing
    RoutingFn routing_fn;     // overrides `routing` when set
    /// Declared bound on the total event intensity sum_i (a_i + d_i).
    double intensity_bound = 0.0;
    Eigen::VectorXi q0;

    /// Constant rates with unit batches; the bound is sum(lambda) + sum(mu).
    static QueueNetwork constant_rates(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& routing = {},
                                       const Eigen::VectorXi& q0 = {});

    /// Throws ParameterError / DimensionError.
    void validate() const;
};

struct QueueSimOptions {
    /// Time averages and throughputs are taken over [warmup, T].
    double warmup = 0.0;
    /// Spacing of the sampled grid path; 0 disables sampling.
    double sample_dt = 0.0;
    bool record_events = true;
};

/// Per-class counters over the whole run. Flow conservation holds exactly:
/// q_end - q0 = external_arrivals + routed_arrivals - departures.
struct QueueTotals {
    Eigen::Matrix<long long, Eigen::Dynamic, 1> external_arrivals, routed_arrivals, departures;
    /// Service completions after the warmup.
    Eigen::Matrix<long long, Eigen::Dynamic, 1> departures_after_warmup;
    long long events = 0;     // accepted events
    long long proposals = 0;  // thinning candidates
};

struct QueuePath {
    double T = 0.0;
    double warmup = 0.0;
    /// Step function: row k is Q on [times[k], times[k+1]). Starts with Q(0).
    reflection::DiscretePath events;
    /// Q at 0, sample_dt, 2 sample_dt, ... <= T.
    reflection::DiscretePath samples;
    Eigen::VectorXd time_average;  // (1 / (T - warmup)) int_warmup^T Q dt
    Eigen::VectorXi q_end;
    QueueTotals totals;

    /// departures_after_warmup / (T - warmup).
    Eigen::VectorXd throughput() const;
};

/// Event-driven simulation by thinning against net.intensity_bound. Throws
/// BoundError (with the state) when the intensities at a candidate time
/// exceed the bound.
QueuePath simulate_queue(const QueueNetwork& net, double T, std::uint64_t seed,
                         std::uint64_t stream = 0, const QueueSimOptions& options = {});

/// Qhat(t) = Q(r^2 t) / r on `grid`, reading `path` as a right-continuous
/// step function. Throws GridError when r^2 max(grid) exceeds the horizon.
reflection::DiscretePath diffusion_scale(const reflection::DiscretePath& path, double horizon,
                                         double r, const std::vector<double>& grid);

/// Arrival rate mu - theta_hat / r of a heavy-traffic family whose scaled
/// drift stays at -theta_hat.
double heavy_traffic_rate(double mu, double theta_hat, double r);

struct RBMSpec {
    Eigen::VectorXd theta;
    Eigen::MatrixXd Gamma;
    reflection::ReflectionSpec reflection;
    Eigen::VectorXd x0;
    /// When nonempty, each path starts at a uniformly drawn row.
    Eigen::MatrixXd initial_samples;

    int dim() const noexcept { return reflection.dim(); }
    /// Gamma symmetric positive definite, reflection completely-S, start in D.
    void validate() const;
};

/// RBM limit of a single M/M/1 station: theta = lambda - mu, Gamma = lambda + mu.
RBMSpec mm1_limit(double lambda, double mu);

/// Brownian motion with drift theta and covariance Gamma on a uniform grid
/// of step dt (the last step is shortened to hit T), regulated by
/// skorokhod_solve.
reflection::RegulatedPath simulate_rbm(const RBMSpec& spec, double T, double dt, std::uint64_t seed,
                                       std::uint64_t stream = 0);

struct RbmRunOptions {
    double warmup = 0.0;
    /// Keep every n-th state in `samples`; 0 keeps none.
    std::size_t sample_every = 0;
    std::size_t chunk = 1 << 16;
};

/// Long RBM run in memory-bounded chunks. Each chunk restarts the free path
/// at the current state, which leaves x unchanged and shifts y by a constant.
struct RbmRun {
    Eigen::VectorXd time_average;  // over [warmup, T]
    Eigen::VectorXd y_end;
    Eigen::VectorXd x_end;
    Eigen::MatrixXd samples;  // rows: kept states after warmup
    double sample_spacing = 0.0;
    std::size_t steps = 0;
    /// Every chunk passed check_regulation (identity, monotone, in-domain,
    /// exact complementarity).
    bool regulation_ok = true;
    Eigen::VectorXd complementarity;
};

RbmRun simulate_rbm_long(const RBMSpec& spec, double T, double dt, std::uint64_t seed,
                         std::uint64_t stream = 0, const RbmRunOptions& options = {});

/// Y_i(t_k) = sum_{m < k} (t_{m+1} - t_m) [x(t_m) on face i].
reflection::DiscretePath boundary_time_process(const reflection::RegulatedPath& reg,
                                               const reflection::ReflectionSpec& spec);

/// A sample for distributional comparison. Rows are observations; when
/// `spacing` > 0 they are consecutive states of one time series, which
/// switches on autocorrelation-aware standard errors and a moving-block
/// bootstrap with blocks of 2 tau rows.
struct StationarySample {
    Eigen::MatrixXd values;
    double spacing = 0.0;
};

struct CompareOptions {
    std::size_t bootstrap = 200;
    double level = 0.95;
    std::uint64_t seed = 7;
};

struct ComponentComparison {
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0;
    double se_a = 0.0, se_b = 0.0;
    double relative_mean_gap = 0.0;  // |mean_a - mean_b| / |mean_b|
    double ks = 0.0;                 // sup |F_a - F_b|
    /// Bootstrap quantile of the distance under the pooled null; ks <= this
    /// means no detectable difference at `level`.
    double ks_critical = 0.0;
    double tau_a = 1.0, tau_b = 1.0;  // integrated autocorrelation times, in rows
};

struct StationaryReport {
    std::vector<ComponentComparison> components;
    std::vector<std::string> warnings;
};

/// Throws DimensionError when the component counts differ or a sample is empty.
StationaryReport compare_stationary(const StationarySample& a, const StationarySample& b,
                                    const CompareOptions& options = {});

/// Sup distance between the empirical CDFs of two samples.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Integrated autocorrelation time 1 + 2 sum rho_k with a self-consistent
/// window (stop at the first lag >= 5 tau).
double integrated_autocorrelation(const Eigen::VectorXd& series);

}  // namespace skewfb::queueing
