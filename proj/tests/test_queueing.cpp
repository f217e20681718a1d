#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skewfb/errors.hpp"
#include "skewfb/queueing/queueing.hpp"
#include "skewfb/reflection/oscillation.hpp"

#include <cmath>
#include <random>

using namespace skewfb;
using namespace skewfb::queueing;
using reflection::Domain;
using reflection::ReflectionSpec;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

RBMSpec orthant_rbm(const Eigen::VectorXd& theta, const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& R,
                    const Eigen::VectorXd& x0) {
    return RBMSpec{theta, Gamma, ReflectionSpec(Domain::orthant(static_cast<int>(theta.size())), R), x0, {}};
}

}  // namespace

TEST_CASE("no arrivals: queue drains and stays empty") {
    auto net = QueueNetwork::constant_rates(vec({0.0}), vec({1.0}), {}, Eigen::VectorXi::Constant(1, 5));
    const QueuePath path = simulate_queue(net, 100.0, 3);
    const auto& v = path.events.values;
    for (Eigen::Index k = 1; k < v.rows(); ++k) CHECK(v(k, 0) <= v(k - 1, 0));
    CHECK(path.q_end(0) == 0);
    CHECK(path.totals.departures(0) == 5);
    CHECK(path.totals.events == 5);
}

TEST_CASE("M/M/1 at load 0.5 has mean queue length near 1") {
    // birth-death stationary law: P(Q = n) = (1 - rho) rho^n, mean rho / (1 - rho)
    auto net = QueueNetwork::constant_rates(vec({0.5}), vec({1.0}));
    QueueSimOptions opt;
    opt.warmup = 100.0;
    opt.record_events = false;
    const QueuePath path = simulate_queue(net, 2e5, 11, 0, opt);
    CHECK(path.time_average(0) == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("tandem line passes its arrival rate through") {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2, 2);
    P(0, 1) = 1.0;
    auto net = QueueNetwork::constant_rates(vec({0.3, 0.0}), vec({1.0, 1.0}), P);
    QueueSimOptions opt;
    opt.warmup = 100.0;
    opt.record_events = false;
    const QueuePath path = simulate_queue(net, 5e4, 5, 0, opt);
    CHECK(path.throughput()(1) == doctest::Approx(0.3).epsilon(0.05));
    CHECK(path.totals.routed_arrivals(1) == path.totals.departures(0));
}

TEST_CASE("flow conservation and integrality with batches and routing") {
    Eigen::MatrixXd P(3, 3);
    P << 0.0, 0.5, 0.2, 0.1, 0.0, 0.6, 0.3, 0.0, 0.0;
    auto net = QueueNetwork::constant_rates(vec({0.4, 0.2, 0.1}), vec({1.5, 1.2, 2.0}), P,
                                            Eigen::VectorXi::Constant(3, 2));
    net.batches = {BatchLaw::geometric(2.0), BatchLaw::fixed(3), BatchLaw::unit()};
    // state-dependent service: faster when long, still within the declared bound
    net.service[0] = [](double, const Eigen::VectorXi& q) { return q(0) > 10 ? 2.0 : 1.5; };
    net.intensity_bound = 0.7 + 2.0 + 1.2 + 2.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const QueuePath path = simulate_queue(net, 500.0, 42, s);
        const auto& t = path.totals;
        const Eigen::VectorXi change = path.q_end - net.q0;
        for (int i = 0; i < 3; ++i) {
            CHECK(change(i) == t.external_arrivals(i) + t.routed_arrivals(i) - t.departures(i));
        }
        const auto& v = path.events.values;
        CHECK((v.array() >= 0.0).all());
        CHECK((v.array() == v.array().round()).all());
        CHECK(path.events.times.size() == static_cast<std::size_t>(t.events + 1));
    }
}

TEST_CASE("thinning reports the state when the bound is exceeded") {
    auto net = QueueNetwork::constant_rates(vec({0.5}), vec({1.0}));
    net.arrival[0] = [](double, const Eigen::VectorXi& q) { return 0.5 + q(0); };
    net.intensity_bound = 3.0;
    try {
        simulate_queue(net, 1e4, 1);
        FAIL("expected a bound error");
    } catch (const BoundError& e) {
        CHECK(std::string(e.what()).find("Q=(") != std::string::npos);
    }
}

TEST_CASE("sampled path is the step function at grid times") {
    auto net = QueueNetwork::constant_rates(vec({0.8}), vec({1.0}));
    QueueSimOptions opt;
    opt.sample_dt = 0.5;
    const QueuePath path = simulate_queue(net, 50.0, 9, 0, opt);
    REQUIRE(path.samples.times.size() == 101);
    const auto scaled = diffusion_scale(path.events, path.T, 1.0, path.samples.times);
    CHECK((scaled.values - path.samples.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("diffusion scaling") {
    reflection::DiscretePath c;
    c.times = {0.0, 1.0, 2.0};
    c.values = Eigen::MatrixXd::Constant(3, 1, 6.0);
    const auto s = diffusion_scale(c, 100.0, 3.0, {0.0, 0.5, 11.0});
    CHECK((s.values.array() == 2.0).all());
    CHECK_THROWS_AS(diffusion_scale(c, 100.0, 3.0, {12.0}), GridError);

    reflection::DiscretePath step;
    step.times = {0.0, 4.0};
    step.values = (Eigen::MatrixXd(2, 1) << 0.0, 8.0).finished();
    const auto t = diffusion_scale(step, 10.0, 2.0, {0.9, 1.0, 2.5});
    CHECK(t.values(0, 0) == 0.0);
    CHECK(t.values(1, 0) == 4.0);
    CHECK(t.values(2, 0) == 4.0);
}

TEST_CASE("heavy-traffic family") {
    CHECK(heavy_traffic_rate(1.0, 0.5, 10.0) == doctest::Approx(0.95));
    CHECK(heavy_traffic_rate(2.0, -1.0, 4.0) == doctest::Approx(2.25));
    CHECK_THROWS_AS(heavy_traffic_rate(1.0, 2.0, 1.0), ParameterError);
    const RBMSpec lim = mm1_limit(0.95, 1.0);
    CHECK(lim.theta(0) == doctest::Approx(-0.05));
    CHECK(lim.Gamma(0, 0) == doctest::Approx(1.95));
}

TEST_CASE("RBM specs are validated") {
    Eigen::MatrixXd G(2, 2);
    G << 1.0, 0.3, 0.2, 1.0;
    CHECK_THROWS_AS(orthant_rbm(vec({0, 0}), G, Eigen::MatrixXd::Identity(2, 2), vec({0, 0})).validate(),
                    ParameterError);
    CHECK_THROWS_AS(orthant_rbm(vec({0, 0}), Eigen::MatrixXd::Identity(2, 2), -Eigen::MatrixXd::Identity(2, 2),
                                vec({0, 0}))
                        .validate(),
                    InfeasibleError);
    CHECK_THROWS_AS(orthant_rbm(vec({0, 0}), Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
                                vec({-1, 0}))
                        .validate(),
                    ParameterError);
}

TEST_CASE("RBM started far from the boundary rarely reflects") {
    const RBMSpec spec = orthant_rbm(vec({0.0}), Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1), vec({5.0}));
    int untouched = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto reg = simulate_rbm(spec, 1.0, 1e-3, 17, s);
        if (reg.y(reg.y.rows() - 1, 0) == 0.0) ++untouched;
    }
    CHECK(untouched >= 99);
}

TEST_CASE("two-dimensional oblique RBM passes the regulation and oscillation checks") {
    Eigen::MatrixXd R(2, 2);
    R << 1.0, -0.4, -0.3, 1.0;
    Eigen::MatrixXd G(2, 2);
    G << 1.0, 0.3, 0.3, 0.8;
    const RBMSpec spec = orthant_rbm(vec({-0.5, -0.2}), G, R, vec({0.2, 0.0}));
    const double kappa = reflection::estimate_kappa(spec.reflection, 50, 3);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto reg = simulate_rbm(spec, 2.0, 1e-2, 23, s);
        CHECK(reflection::check_regulation(reg, spec.reflection).ok());
        CHECK(reflection::check_oscillation_inequality(reg, kappa).ok());
    }
}

TEST_CASE("chunked RBM runs do not depend on the chunk size") {
    const RBMSpec spec = orthant_rbm(vec({-1.0}), Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1), vec({0.0}));
    RbmRunOptions a, b;
    a.chunk = 97;
    b.chunk = 5000;
    a.warmup = b.warmup = 1.0;
    a.sample_every = b.sample_every = 10;
    const RbmRun ra = simulate_rbm_long(spec, 50.0, 1e-2, 4, 0, a);
    const RbmRun rb = simulate_rbm_long(spec, 50.0, 1e-2, 4, 0, b);
    CHECK(ra.steps == 5000);
    CHECK(ra.regulation_ok);
    CHECK(rb.regulation_ok);
    CHECK(ra.time_average(0) == doctest::Approx(rb.time_average(0)).epsilon(1e-9));
    CHECK(ra.y_end(0) == doctest::Approx(rb.y_end(0)).epsilon(1e-9));
    CHECK(ra.samples.rows() == rb.samples.rows());
    CHECK((ra.complementarity.array() == 0.0).all());
}

TEST_CASE("boundary occupation time") {
    reflection::DiscretePath z;
    z.times = {0.0, 0.25, 0.5, 0.75, 1.0};
    const ReflectionSpec spec(Domain::orthant(1), Eigen::MatrixXd::Identity(1, 1));

    z.values = (Eigen::MatrixXd(5, 1) << 1.0, 1.5, 1.2, 2.0, 1.1).finished();
    const auto inner = boundary_time_process(reflection::skorokhod_solve(z, spec), spec);
    CHECK((inner.values.array() == 0.0).all());

    z.values = (Eigen::MatrixXd(5, 1) << 0.0, -0.25, -0.5, -0.75, -1.0).finished();
    const auto glued = boundary_time_process(reflection::skorokhod_solve(z, spec), spec);
    for (Eigen::Index k = 0; k < 5; ++k) CHECK(glued.values(k, 0) == doctest::Approx(z.times[static_cast<std::size_t>(k)]));

    const RBMSpec rbm = orthant_rbm(vec({0.0}), Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1), vec({0.5}));
    double frac = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto reg = simulate_rbm(rbm, 1.0, 1e-3, 8, s);
        const auto occ = boundary_time_process(reg, rbm.reflection);
        frac += occ.values(occ.values.rows() - 1, 0) / 20.0;
    }
    CHECK(frac > 0.0);
    CHECK(frac < 0.05);
}

TEST_CASE("Kolmogorov-Smirnov distance") {
    CHECK(ks_distance({1.0, 2.0, 3.0}, {2.0, 3.0, 4.0}) == doctest::Approx(1.0 / 3.0));
    CHECK(ks_distance({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(ks_distance({0.0}, {5.0}) == 1.0);
}

TEST_CASE("integrated autocorrelation time") {
    Rng rng = make_rng(1);
    std::normal_distribution<double> n;
    Eigen::VectorXd iid(20000), ar(200000);
    for (Eigen::Index k = 0; k < iid.size(); ++k) iid(k) = n(rng);
    ar(0) = 0.0;
    // AR(1): tau = (1 + phi) / (1 - phi)
    for (Eigen::Index k = 1; k < ar.size(); ++k) ar(k) = 0.9 * ar(k - 1) + n(rng);
    CHECK(integrated_autocorrelation(iid) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(integrated_autocorrelation(ar) == doctest::Approx(19.0).epsilon(0.15));
}

TEST_CASE("stationary comparison") {
    const RBMSpec spec = orthant_rbm(vec({-1.0}), Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1), vec({0.5}));
    RbmRunOptions opt;
    opt.warmup = 5.0;
    opt.sample_every = 10;
    auto run = [&](std::uint64_t seed) {
        const RbmRun r = simulate_rbm_long(spec, 500.0, 1e-2, seed, 0, opt);
        return StationarySample{r.samples, r.sample_spacing};
    };
    const StationarySample a = run(1);

    const auto same = compare_stationary(a, a);
    CHECK(same.components[0].ks == 0.0);
    CHECK(same.components[0].relative_mean_gap == 0.0);

    // independent seeds: the distance should sit inside the 99% null band
    // for nearly every pair
    CompareOptions copt;
    copt.level = 0.99;
    int inside = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto rep = compare_stationary(run(100 + 2 * s), run(101 + 2 * s), copt);
        CHECK(rep.warnings.empty());
        CHECK(rep.components[0].tau_a > 1.0);
        if (rep.components[0].ks <= rep.components[0].ks_critical) ++inside;
    }
    CHECK(inside >= 8);

    // a ramp is maximally persistent: its window covers far fewer than 10
    // autocorrelation times
    Eigen::MatrixXd ramp(100, 1);
    for (Eigen::Index k = 0; k < 100; ++k) ramp(k, 0) = static_cast<double>(k);
    CHECK_FALSE(compare_stationary(StationarySample{ramp, 1.0}, a).warnings.empty());
    CHECK_THROWS_AS(compare_stationary(a, StationarySample{Eigen::MatrixXd::Zero(5, 2), 0.0}), DimensionError);
}
