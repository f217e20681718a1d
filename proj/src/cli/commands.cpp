#include "commands.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/format.hpp"
#include "skewfb/games/games.hpp"
#include "skewfb/pde/pde.hpp"
#include "skewfb/queueing/queueing.hpp"
#include "skewfb/reflection/oscillation.hpp"
#include "skewfb/reflection/skorokhod.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace skewfb::cli {

namespace {

Json jvec(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json jmat(const Eigen::MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(jvec(m.row(r).transpose()));
    return a;
}

template <class Int>
Json jints(const Eigen::Matrix<Int, Eigen::Dynamic, 1>& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) {
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << '\n';
    }
    Csv& cell(double v) { return raw(fmt17(v)); }
    Csv& raw(const std::string& s) {
        os_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }
    Csv& cells(const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) cell(v(i));
        return *this;
    }
    void end() {
        os_ << '\n';
        first_ = true;
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
    bool first_ = true;
};

std::vector<std::string> numbered(const std::string& stem, Eigen::Index n, int from = 1) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(stem + "_" + std::to_string(i + from));
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

Json regulation_json(const reflection::RegulationCheck& c) {
    return {{"in_domain", c.in_domain},
            {"monotone", c.monotone},
            {"starts_at_zero", c.starts_at_zero},
            {"complementarity", jvec(c.complementarity)},
            {"identity_residual", c.identity_residual},
            {"ok", c.ok()}};
}

Json validation_json(const fbsde::ValidationReport& r) {
    return {{"terminal_residual", r.terminal_residual},
            {"forward_complementarity", jvec(r.forward_complementarity)},
            {"backward_complementarity", jvec(r.backward_complementarity)},
            {"forward_monotone", r.forward_monotone},
            {"backward_monotone", r.backward_monotone},
            {"forward_in_domain", r.forward_in_domain},
            {"backward_in_domain", r.backward_in_domain},
            {"growth_checks", r.growth_checks},
            {"growth_violations", r.growth_violations},
            {"worst_growth_ratio", r.worst_growth_ratio},
            {"findings", r.findings},
            {"ok", r.ok()}};
}

// ---------------------------------------------------------------- check-matrix

CommandOutput check_matrix(const Json& cfg, const Overrides&) {
    const reflection::ReflectionSpec spec = read_reflection(cfg);
    const reflection::CompletelySCertificate cert = reflection::is_completely_s(spec);
    Json j;
    j["dim"] = spec.dim();
    j["faces"] = spec.faces();
    j["R"] = jmat(spec.matrix());
    j["completely_s"] = cert.holds;
    j["failing_faces"] = cert.failing ? Json(reflection::face_indices(*cert.failing)) : Json(nullptr);
    j["p_matrix"] = spec.is_p_matrix();
    j["increment_bound"] = spec.increment_bound();
    Json w = Json::array();
    for (const auto& s : cert.witnesses) w.push_back({{"faces", reflection::face_indices(s.faces)}, {"x", jvec(s.x)}});
    j["witnesses"] = w;
    try {
        const auto sc = reflection::spectral_radius_condition(reflection::normalized(spec));
        j["spectral"] = {{"holds", sc.holds}, {"radii", sc.radii}, {"max_radius", sc.max_radius}};
    } catch (const NormalizationError& e) {
        j["spectral"] = {{"holds", false}, {"error", e.what()}};
    }
    return {{{"certificate.json", dump(j)}}, std::nullopt, {}};
}

// ---------------------------------------------------------------- skorokhod

struct SkorokhodRun {
    reflection::ReflectionSpec spec;
    reflection::RegulatedPath reg;
    std::string method;
    std::optional<std::uint64_t> seed;
};

SkorokhodRun skorokhod_compute(const Json& cfg, const Overrides& o) {
    reflection::ReflectionSpec spec = read_reflection(cfg);
    const int p = spec.dim();
    const Json& path = require(cfg, "path");
    reflection::DiscretePath z;
    std::optional<std::uint64_t> seed;
    if (path.contains("times")) {
        const Eigen::VectorXd t = to_vector(path.at("times"), "times");
        z.times.assign(t.data(), t.data() + t.size());
        z.values = to_matrix(require(path, "values"), "values");
    } else {
        const Json& type = require(path, "type");
        const std::size_t steps = count_or(path, "steps", 100);
        if (steps == 0) throw ConfigError("path needs at least one step");
        if (type == "linear") {
            const double T = number(path, "T");
            const Eigen::VectorXd start = vector_or(path, "start", Eigen::VectorXd::Zero(p));
            const Eigen::VectorXd slope = to_vector(require(path, "slope"), "slope");
            if (start.size() != p || slope.size() != p) throw ConfigError("path start and slope need p entries");
            z.times = levy::uniform_grid(T, steps);
            z.values.resize(static_cast<Eigen::Index>(steps + 1), p);
            for (std::size_t k = 0; k <= steps; ++k) {
                z.values.row(static_cast<Eigen::Index>(k)) = (start + z.times[k] * slope).transpose();
            }
        } else if (type == "random") {
            seed = resolve_seed(cfg, o);
            z = reflection::random_step_path(spec, steps, *seed, count_or(path, "stream", 0));
        } else {
            throw ConfigError("path type must be 'linear' or 'random' (or give times and values)");
        }
    }
    if (z.values.rows() != static_cast<Eigen::Index>(z.times.size()) || z.values.cols() != p) {
        throw ConfigError("path values must have one row per time and p columns");
    }
    const std::string method = cfg.value("method", std::string("lcp"));
    reflection::RegulatedPath reg;
    if (method == "lcp") {
        reg = reflection::skorokhod_solve(z, spec);
    } else if (method == "fixed_point") {
        reflection::FixedPointOptions fo;
        fo.tol = o.tol.value_or(number_or(cfg, "tol", fo.tol));
        fo.max_iterations = count_or(cfg, "max_iterations", 0);
        reg = reflection::skorokhod_fixed_point(z, reflection::normalized(spec), fo);
        spec = reflection::normalized(spec);
    } else {
        throw ConfigError("method must be 'lcp' or 'fixed_point'");
    }
    return {std::move(spec), std::move(reg), method, seed};
}

CommandOutput skorokhod(const Json& cfg, const Overrides& o) {
    const SkorokhodRun run = skorokhod_compute(cfg, o);
    std::ostringstream csv;
    reflection::write_csv(csv, run.reg);
    Json j;
    j["method"] = run.method;
    j["steps"] = run.reg.times.size() - 1;
    j["nonunique_steps"] = run.reg.nonunique_steps;
    j["regulation"] = regulation_json(reflection::check_regulation(run.reg, run.spec));
    j["y_end"] = jvec(run.reg.y.bottomRows(1).transpose());
    return {{{"path.csv", csv.str()}, {"report.json", dump(j)}}, run.seed, {}};
}

// ---------------------------------------------------------------- simulate-forward

CommandOutput simulate_forward_cmd(const Json& cfg, const Overrides& o) {
    const fbsde::FBSDEProblem pb = read_problem(cfg);
    const std::size_t paths = resolve_paths(cfg, o, 100);
    const double dt = resolve_dt(cfg, o, 0.01);
    const std::uint64_t seed = resolve_seed(cfg, o);
    const auto grids = fbsde::sample_drivers(pb, paths, dt, seed, resolve_threads(cfg, o));
    const std::size_t keep = std::min(paths, count_or(cfg, "write_paths", 20));
    const int p = pb.p(), b = pb.b();

    Csv csv(concat(concat({"path", "t"}, numbered("x", p)), numbered("y", b)));
    Eigen::MatrixXd XT(p, static_cast<Eigen::Index>(paths));
    Eigen::MatrixXd YT = Eigen::MatrixXd::Zero(b, static_cast<Eigen::Index>(paths));
    std::size_t nonunique = 0;
    for (std::size_t i = 0; i < paths; ++i) {
        const fbsde::ForwardPath fp = fbsde::simulate_forward(pb, grids[i], fbsde::BackwardFields{});
        const auto last = fp.X.cols() - 1;
        XT.col(static_cast<Eigen::Index>(i)) = fp.X.col(last);
        if (b > 0) YT.col(static_cast<Eigen::Index>(i)) = fp.Y.col(last);
        nonunique += fp.nonunique_steps.size();
        if (i >= keep) continue;
        for (Eigen::Index k = 0; k <= last; ++k) {
            csv.raw(std::to_string(i)).cell(grids[i].times[static_cast<std::size_t>(k)]).cells(fp.X.col(k));
            if (b > 0) csv.cells(fp.Y.col(k));
            csv.end();
        }
    }
    const Eigen::VectorXd mean = XT.rowwise().mean();
    const Eigen::VectorXd sd =
        paths > 1 ? Eigen::VectorXd(((XT.colwise() - mean).array().square().rowwise().sum() / double(paths - 1)).sqrt())
                  : Eigen::VectorXd::Zero(p);
    Json j;
    j["paths"] = paths;
    j["steps"] = grids.front().steps();
    j["x_T_mean"] = jvec(mean);
    j["x_T_sd"] = jvec(sd);
    j["y_T_mean"] = jvec(YT.rowwise().mean());
    j["nonunique_steps"] = nonunique;
    j["written_paths"] = keep;
    return {{{"forward.csv", csv.str()}, {"summary.json", dump(j)}}, seed, {}};
}

// ---------------------------------------------------------------- solve-fbsde

struct FbsdeRun {
    fbsde::FBSDEProblem problem;
    fbsde::EnsembleSolution solution;
    fbsde::ValidationReport report;
    std::uint64_t seed;
};

FbsdeRun fbsde_compute(const Json& cfg, const Overrides& o) {
    fbsde::FBSDEProblem pb = read_problem(cfg);
    const fbsde::PicardConfig pc = read_picard(cfg, o);
    fbsde::EnsembleSolution sol = fbsde::picard_iterate(pb, pc);
    fbsde::ValidationReport rep = fbsde::validate_solution(pb, sol);
    return {std::move(pb), std::move(sol), std::move(rep), pc.seed};
}

CommandOutput solve_fbsde(const Json& cfg, const Overrides& o) {
    const FbsdeRun run = fbsde_compute(cfg, o);
    const auto& sol = run.solution;
    const auto& d = sol.diagnostics;
    Json j;
    j["V0"] = jvec(sol.backward.v0);
    j["V0_se"] = jvec(sol.backward.v0_se);
    j["paths"] = sol.forward.size();
    j["steps"] = sol.times.size() - 1;
    j["picard"] = {{"iterations", d.iterations}, {"norms", d.norms},         {"converged", d.converged},
                   {"diverged", d.diverged},     {"gamma", d.gamma},         {"derivative_order", d.derivative_order},
                   {"xi", d.xi},                 {"warnings", d.warnings}};
    j["lsmc_warnings"] = sol.backward.warnings;
    j["validation"] = validation_json(run.report);

    const int p = run.problem.p(), q = run.problem.q();
    Csv csv(concat(concat({"t"}, numbered("x_mean", p)), numbered("v_mean", q)));
    const double n = static_cast<double>(sol.forward.size());
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        Eigen::VectorXd xm = Eigen::VectorXd::Zero(p), vm = Eigen::VectorXd::Zero(q);
        for (std::size_t i = 0; i < sol.forward.size(); ++i) {
            xm += sol.forward[i].X.col(static_cast<Eigen::Index>(k));
            vm += sol.backward.fields[i].V.col(static_cast<Eigen::Index>(k));
        }
        csv.cell(sol.times[k]).cells(xm / n).cells(vm / n).end();
    }
    return {{{"mean_path.csv", csv.str()}, {"result.json", dump(j)}}, run.seed, {}};
}

// ---------------------------------------------------------------- queue-sim

struct QueueRun {
    queueing::QueueNetwork net;
    queueing::QueuePath path;
    std::uint64_t seed;
};

QueueRun queue_compute(const Json& cfg, const Overrides& o) {
    const Eigen::VectorXd lambda = to_vector(require(cfg, "lambda"), "lambda");
    const Eigen::VectorXd mu = to_vector(require(cfg, "mu"), "mu");
    const Eigen::MatrixXd routing = matrix_or(cfg, "routing");
    Eigen::VectorXi q0;
    if (cfg.contains("q0")) {
        const Eigen::VectorXd v = to_vector(cfg.at("q0"), "q0");
        q0 = v.array().round().cast<int>();
        if (((q0.cast<double>() - v).array() != 0.0).any() || (q0.array() < 0).any()) {
            throw ConfigError("q0 must hold nonnegative integers");
        }
    }
    queueing::QueueNetwork net = queueing::QueueNetwork::constant_rates(lambda, mu, routing, q0);
    if (cfg.contains("batches")) {
        const Json& bs = cfg.at("batches");
        if (!bs.is_array() || bs.size() != static_cast<std::size_t>(net.p)) throw ConfigError("one batch law per class");
        for (std::size_t i = 0; i < bs.size(); ++i) {
            const Json& law = require(bs[i], "law");
            if (law == "fixed") {
                net.batches[i] = queueing::BatchLaw::fixed(static_cast<int>(count_or(bs[i], "size", 1)));
            } else if (law == "geometric") {
                net.batches[i] = queueing::BatchLaw::geometric(number(bs[i], "mean"));
            } else {
                throw ConfigError("batch law must be 'fixed' or 'geometric'");
            }
        }
    }
    queueing::QueueSimOptions opts;
    opts.warmup = number_or(cfg, "warmup", 0.0);
    opts.sample_dt = number_or(cfg, "sample_dt", 0.0);
    opts.record_events = false;
    const std::uint64_t seed = resolve_seed(cfg, o);
    queueing::QueuePath path = queueing::simulate_queue(net, number(cfg, "T"), seed, 0, opts);
    return {std::move(net), std::move(path), seed};
}

bool flow_conserved(const QueueRun& run) {
    const auto& t = run.path.totals;
    const Eigen::Matrix<long long, Eigen::Dynamic, 1> lhs = (run.path.q_end - run.net.q0).cast<long long>();
    return lhs == t.external_arrivals + t.routed_arrivals - t.departures && (run.path.q_end.array() >= 0).all();
}

CommandOutput queue_sim(const Json& cfg, const Overrides& o) {
    const QueueRun run = queue_compute(cfg, o);
    const auto& path = run.path;
    Csv csv(concat({"t"}, numbered("q", run.net.p)));
    for (std::size_t k = 0; k < path.samples.times.size(); ++k) {
        csv.cell(path.samples.times[k]).cells(path.samples.values.row(static_cast<Eigen::Index>(k)).transpose()).end();
    }
    Json j;
    j["T"] = path.T;
    j["warmup"] = path.warmup;
    j["time_average"] = jvec(path.time_average);
    j["throughput"] = jvec(path.throughput());
    j["q_end"] = jints(path.q_end);
    j["totals"] = {{"external_arrivals", jints(path.totals.external_arrivals)},
                   {"routed_arrivals", jints(path.totals.routed_arrivals)},
                   {"departures", jints(path.totals.departures)},
                   {"events", path.totals.events},
                   {"proposals", path.totals.proposals}};
    j["flow_conservation"] = flow_conserved(run);
    return {{{"samples.csv", csv.str()}, {"summary.json", dump(j)}}, run.seed, {}};
}

// ---------------------------------------------------------------- rbm-sim

struct RbmCompute {
    queueing::RBMSpec spec;
    queueing::RbmRun run;
    std::uint64_t seed;
};

RbmCompute rbm_compute(const Json& cfg, const Overrides& o) {
    std::optional<queueing::RBMSpec> spec;
    if (cfg.contains("mm1")) {
        spec = queueing::mm1_limit(number(cfg.at("mm1"), "lambda"), number(cfg.at("mm1"), "mu"));
        if (cfg.contains("x0")) spec->x0 = to_vector(cfg.at("x0"), "x0");
    } else {
        reflection::ReflectionSpec refl = read_reflection(require(cfg, "reflection"));
        const int p = refl.dim();
        spec = queueing::RBMSpec{to_vector(require(cfg, "theta"), "theta"), to_matrix(require(cfg, "Gamma"), "Gamma"),
                                 std::move(refl), vector_or(cfg, "x0", Eigen::VectorXd::Zero(p)), {}};
    }
    spec->validate();
    queueing::RbmRunOptions ro;
    ro.warmup = number_or(cfg, "warmup", 0.0);
    ro.sample_every = count_or(cfg, "sample_every", 0);
    ro.chunk = count_or(cfg, "chunk", ro.chunk);
    if (ro.chunk == 0) throw ConfigError("chunk must be positive");
    const std::uint64_t seed = resolve_seed(cfg, o);
    queueing::RbmRun run = queueing::simulate_rbm_long(*spec, number(cfg, "T"), resolve_dt(cfg, o, 0.01), seed, 0, ro);
    return {std::move(*spec), std::move(run), seed};
}

CommandOutput rbm_sim(const Json& cfg, const Overrides& o) {
    const RbmCompute c = rbm_compute(cfg, o);
    const int p = c.spec.dim();
    Csv csv(concat({"index"}, numbered("x", p)));
    for (Eigen::Index k = 0; k < c.run.samples.rows(); ++k) {
        csv.raw(std::to_string(k)).cells(c.run.samples.row(k).transpose()).end();
    }
    Json j;
    j["steps"] = c.run.steps;
    j["time_average"] = jvec(c.run.time_average);
    j["x_end"] = jvec(c.run.x_end);
    j["y_end"] = jvec(c.run.y_end);
    j["sample_spacing"] = c.run.sample_spacing;
    j["regulation_ok"] = c.run.regulation_ok;
    j["complementarity"] = jvec(c.run.complementarity);
    const auto& refl = c.spec.reflection;
    if (p == 1 && refl.domain().kind() == reflection::DomainKind::orthant && refl.matrix()(0, 0) == 1.0 &&
        c.spec.theta(0) < 0.0) {
        // one-dimensional reflected BM with negative drift: exponential stationary law
        j["stationary_mean"] = c.spec.Gamma(0, 0) / (2.0 * -c.spec.theta(0));
    }
    return {{{"samples.csv", csv.str()}, {"summary.json", dump(j)}}, c.seed, {}};
}

// ---------------------------------------------------------------- feynman-kac

CommandOutput feynman_kac(const Json& cfg, const Overrides& o) {
    pde::FeynmanKacProblem fk;
    fk.p = static_cast<int>(count_or(cfg, "p", 1));
    fk.d = static_cast<int>(count_or(cfg, "d", static_cast<std::size_t>(fk.p)));
    fk.T = number(cfg, "T");
    fk.H = read_scalar_fn(require(cfg, "H"), fk.p, "H");
    if (cfg.contains("g")) fk.g = read_scalar_fn(cfg.at("g"), fk.p, "g");
    if (cfg.contains("b")) {
        const Eigen::VectorXd b = to_vector(cfg.at("b"), "b");
        if (b.size() != fk.p) throw ConfigError("b needs p entries");
        fk.b = [b](double, const Eigen::VectorXd&) { return b; };
    }
    if (cfg.contains("sigma")) {
        const Eigen::MatrixXd s = to_matrix(cfg.at("sigma"), "sigma");
        if (s.rows() != fk.p || s.cols() != fk.d) throw ConfigError("sigma must be p x d");
        fk.sigma = [s](double, const Eigen::VectorXd&) { return s; };
    } else if (fk.d != fk.p) {
        throw ConfigError("sigma is required when d differs from p");
    }
    if (cfg.contains("domain")) {
        fk.domain.lower = to_vector(require(cfg.at("domain"), "lower"), "lower");
        fk.domain.upper = to_vector(require(cfg.at("domain"), "upper"), "upper");
        if (fk.domain.lower.size() != fk.p || fk.domain.upper.size() != fk.p) throw ConfigError("domain needs p bounds");
    }
    pde::McConfig mc;
    mc.paths = resolve_paths(cfg, o, mc.paths);
    mc.dt = resolve_dt(cfg, o, mc.dt);
    mc.seed = resolve_seed(cfg, o);
    mc.threads = resolve_threads(cfg, o);
    mc.half_laplacian = flag_or(cfg, "half_laplacian", true);
    mc.overshoot_tol = number_or(cfg, "overshoot_tol", mc.overshoot_tol);
    const double t = number_or(cfg, "t", 0.0);
    Eigen::MatrixXd probes;
    if (cfg.contains("probes")) {
        probes = to_matrix(cfg.at("probes"), "probes");
    } else {
        probes = to_vector(require(cfg, "x"), "x").transpose();
    }
    if (probes.cols() != fk.p) throw ConfigError("probe points need p coordinates");

    Csv csv(concat(numbered("x", fk.p), {"value", "se", "exit_fraction", "mean_overshoot"}));
    Json list = Json::array();
    for (Eigen::Index r = 0; r < probes.rows(); ++r) {
        const Eigen::VectorXd x = probes.row(r).transpose();
        const pde::McEstimate e = pde::feynman_kac_dirichlet_poisson(fk, t, x, mc);
        csv.cells(x).cell(e.value).cell(e.se).cell(e.exit_fraction).cell(e.mean_overshoot).end();
        list.push_back({{"x", jvec(x)},
                        {"value", e.value},
                        {"se", e.se},
                        {"paths", e.paths},
                        {"exit_fraction", e.exit_fraction},
                        {"mean_overshoot", e.mean_overshoot},
                        {"warnings", e.warnings}});
    }
    Json j;
    j["t"] = t;
    j["half_laplacian"] = mc.half_laplacian;
    j["estimates"] = list;
    return {{{"estimates.csv", csv.str()}, {"result.json", dump(j)}}, mc.seed, {}};
}

// ---------------------------------------------------------------- hjb-eval

CommandOutput hjb_eval(const Json& cfg, const Overrides&) {
    const Json& gj = require(cfg, "grid");
    std::vector<int> points;
    for (const Json& n : require(gj, "points")) {
        if (!n.is_number_integer()) throw ConfigError("grid points must be integers");
        points.push_back(n.get<int>());
    }
    const pde::Grid grid(to_vector(require(gj, "lower"), "lower"), to_vector(require(gj, "upper"), "upper"), points);
    const int p = grid.dim();
    const Json& players = require(cfg, "field");
    if (!players.is_array() || players.empty()) throw ConfigError("field must list one function per player");
    const int q = static_cast<int>(players.size());
    std::vector<ScalarFn> fns;
    for (int l = 0; l < q; ++l) fns.push_back(read_scalar_fn(players[static_cast<std::size_t>(l)], p, "field"));
    const double t = number_or(cfg, "t", 0.0);
    const pde::GridField field = pde::with_total(pde::sample_field(grid, t, q, [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(q);
        for (int l = 0; l < q; ++l) v(l) = fns[static_cast<std::size_t>(l)](t, x);
        return v;
    }));

    const Json empty = Json::object();
    const Json& cj = cfg.contains("coefficients") ? cfg.at("coefficients") : empty;
    pde::HJBCoefficients c;
    c.p = p;
    c.q = q;
    c.driver = cj.contains("driver") ? read_driver(cj.at("driver")) : levy::LevyDriver{};
    c.d = c.driver.d;
    auto const_vec = [&](const std::string& key, Eigen::Index n) {
        const Eigen::VectorXd v = vector_or(cj, key);
        if (v.size() != 0 && v.size() != n) throw ConfigError("'" + key + "' has wrong length");
        return v;
    };
    auto const_mat = [&](const std::string& key, Eigen::Index r, Eigen::Index cols) {
        const Eigen::MatrixXd m = matrix_or(cj, key);
        if (m.size() != 0 && (m.rows() != r || (cols >= 0 && m.cols() != cols))) {
            throw ConfigError("'" + key + "' has wrong shape");
        }
        return m;
    };
    if (const Eigen::VectorXd b = const_vec("b", p); b.size()) {
        c.b = [b](double, const Eigen::VectorXd&, const Eigen::VectorXd&) { return b; };
    }
    if (const Eigen::MatrixXd s = const_mat("sigma", p, c.d); s.size()) {
        c.sigma = [s](double, const Eigen::VectorXd&, const Eigen::VectorXd&) { return s; };
    }
    if (const Eigen::VectorXd cc = const_vec("c", q); cc.size()) {
        c.c = [cc](double, const Eigen::VectorXd&, const Eigen::VectorXd&) { return cc; };
    }
    if (const Eigen::MatrixXd a = const_mat("alpha", q, c.d); a.size()) {
        c.alpha = [a](double, const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) { return a; };
    }
    const int h = c.driver.h();
    const Eigen::MatrixXd eta_a = const_mat("eta_a", p, h), eta_b = const_mat("eta_b", p, h);
    if (h > 0) {
        const Eigen::MatrixXd ea = eta_a.size() ? eta_a : Eigen::MatrixXd::Zero(p, h);
        const Eigen::MatrixXd eb = eta_b.size() ? eta_b : Eigen::MatrixXd::Zero(p, h);
        c.eta = [ea, eb](double, const Eigen::VectorXd&, const Eigen::VectorXd&, int j, double z) {
            return Eigen::VectorXd(ea.col(j) + eb.col(j) * z);
        };
        const Eigen::MatrixXd za = const_mat("zeta_a", q, h), zb = const_mat("zeta_b", q, h);
        if (za.size() || zb.size()) {
            const Eigen::MatrixXd a = za.size() ? za : Eigen::MatrixXd::Zero(q, h);
            const Eigen::MatrixXd bb = zb.size() ? zb : Eigen::MatrixXd::Zero(q, h);
            c.zeta = [a, bb](double, const Eigen::VectorXd&, const Eigen::VectorXd&, int j, double z) {
                return Eigen::VectorXd(a.col(j) + bb.col(j) * z);
            };
        }
    }
    c.v = const_mat("v", p, -1);
    if (const Eigen::VectorXd g = const_vec("gamma", c.v.cols()); g.size()) {
        c.gamma = [g](double, const Eigen::VectorXd&) { return g; };
    }
    c.s = const_mat("s", q, q);
    if (const Eigen::VectorXd be = const_vec("beta", q); be.size()) {
        c.beta = [be](double, const Eigen::VectorXd&) { return be; };
    }

    pde::GeneratorOptions go;
    go.half_laplacian = flag_or(cfg, "half_laplacian", false);
    go.clamp = flag_or(cfg, "clamp", false);
    go.quadrature_nodes = static_cast<int>(count_or(cfg, "quadrature_nodes", 16));
    const Eigen::VectorXd u = vector_or(cfg, "u");

    Eigen::MatrixXd nodes;
    if (cfg.contains("nodes")) {
        nodes = to_matrix(cfg.at("nodes"), "nodes");
        if (nodes.cols() != p) throw ConfigError("nodes need p coordinates");
    } else {
        nodes.resize(grid.size(), p);
        for (Eigen::Index k = 0; k < grid.size(); ++k) nodes.row(k) = grid.point(k).transpose();
    }
    Csv csv(concat(numbered("x", p), numbered("L", q + 1, 0)));
    std::set<std::string> warnings;
    for (Eigen::Index r = 0; r < nodes.rows(); ++r) {
        const Eigen::VectorXd x = nodes.row(r).transpose();
        const pde::GeneratorValue gv = pde::hjb_generator_eval(field, 0, c, u, x, go);
        csv.cells(x).cells(gv.L).end();
        warnings.insert(gv.warnings.begin(), gv.warnings.end());
    }
    Json j;
    j["t"] = t;
    j["nodes"] = nodes.rows();
    j["half_laplacian"] = go.half_laplacian;
    j["warnings"] = std::vector<std::string>(warnings.begin(), warnings.end());
    return {{{"generator.csv", csv.str()}, {"result.json", dump(j)}}, std::nullopt, {}};
}

// ---------------------------------------------------------------- game-solve

CommandOutput game_solve(const Json& cfg, const Overrides& o) {
    const fbsde::FBSDEProblem pb = read_problem(cfg);
    const fbsde::PicardConfig pc = read_picard(cfg, o);
    const Json& pj = require(cfg, "players");
    if (!pj.is_array()) throw ConfigError("players must be an array");
    std::vector<std::vector<games::Action>> actions;
    for (const Json& player : pj) {
        std::vector<games::Action> set;
        for (const Json& a : require(player, "actions")) {
            const std::string name = require(a, "name").get<std::string>();
            if (name.find_first_of(",\"\n") != std::string::npos) throw ConfigError("action names may not contain , \" or newlines");
            const Eigen::VectorXd u0 = to_vector(require(a, "u"), "u");
            const Eigen::MatrixXd gain = matrix_or(a, "gain");
            if (gain.size() && (gain.rows() != u0.size() || gain.cols() != pb.p())) {
                throw ConfigError("action gain must be (control dim) x p");
            }
            set.push_back({name, [u0, gain](double, const Eigen::VectorXd& x) {
                               return gain.size() ? Eigen::VectorXd(u0 + gain * x) : u0;
                           }});
        }
        actions.push_back(std::move(set));
    }
    const games::PolicyGrid grid(std::move(actions));
    games::GameOptions go;
    go.common_random_numbers = flag_or(cfg, "common_random_numbers", true);
    go.threads = pc.threads;
    if (cfg.contains("epsilon")) go.epsilon = number(cfg, "epsilon");
    const games::GameResult r = games::solve_game(pb, grid, pc, go);

    auto labels_of = [&](const std::vector<std::size_t>& set) {
        std::vector<std::string> out;
        for (std::size_t i : set) out.push_back(r.labels[i]);
        return out;
    };
    Json j;
    j["shape"] = r.shape;
    j["labels"] = r.labels;
    j["values"] = jmat(r.values);
    j["se"] = jmat(r.se);
    j["admissible"] = r.admissible;
    j["nash"] = r.nash;
    j["nash_labels"] = labels_of(r.nash);
    j["pareto_nash"] = r.pareto_nash;
    j["pareto_nash_labels"] = labels_of(r.pareto_nash);
    j["epsilon"] = r.epsilon;
    j["pooled_se"] = r.pooled_se();
    j["assumptions"] = r.assumptions;
    j["warnings"] = r.warnings;

    std::vector<std::size_t> order(r.profiles());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return r.values(static_cast<Eigen::Index>(a), 0) > r.values(static_cast<Eigen::Index>(b), 0);
    });
    std::vector<std::string> header{"rank", "profile", "label"};
    for (int l = 0; l <= r.players(); ++l) {
        header.push_back("V_" + std::to_string(l));
        header.push_back("se_" + std::to_string(l));
    }
    header.insert(header.end(), {"admissible", "nash", "pareto_nash"});
    Csv csv(header);
    auto member = [](const std::vector<std::size_t>& s, std::size_t i) { return std::find(s.begin(), s.end(), i) != s.end(); };
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t prof = order[rank];
        const auto row = static_cast<Eigen::Index>(prof);
        csv.raw(std::to_string(rank + 1)).raw(std::to_string(prof)).raw(r.labels[prof]);
        for (Eigen::Index l = 0; l < r.values.cols(); ++l) csv.cell(r.values(row, l)).cell(r.se(row, l));
        csv.raw(r.admissible[prof] ? "1" : "0").raw(member(r.nash, prof) ? "1" : "0").raw(member(r.pareto_nash, prof) ? "1" : "0");
        csv.end();
    }
    return {{{"leaderboard.csv", csv.str()}, {"values.json", dump(j)}}, pc.seed, {}};
}

// ---------------------------------------------------------------- validate

CommandOutput validate(const Json& cfg, const Overrides& o) {
    const Json& target = require(cfg, "target");
    const std::string kind = require(target, "kind").get<std::string>();
    Json checks = Json::array();
    CommandOutput out;
    auto check = [&](const std::string& name, bool ok, Json detail) {
        checks.push_back({{"name", name}, {"ok", ok}, {"detail", std::move(detail)}});
        if (!ok) out.violations.push_back(kind + ": " + name);
    };
    if (kind == "skorokhod") {
        const SkorokhodRun run = skorokhod_compute(target, o);
        out.seed = run.seed;
        const auto rc = reflection::check_regulation(run.reg, run.spec);
        check("in_domain", rc.in_domain, nullptr);
        check("monotone", rc.monotone, nullptr);
        check("starts_at_zero", rc.starts_at_zero, nullptr);
        check("complementarity_exact", (rc.complementarity.array() == 0.0).all(), jvec(rc.complementarity));
        check("identity_residual", rc.identity_residual <= 1e-9, rc.identity_residual);
    } else if (kind == "regulated-path") {
        // a regulation produced elsewhere: rows of x, y, z at `times`
        const reflection::ReflectionSpec spec = read_reflection(target);
        reflection::RegulatedPath reg;
        const Eigen::VectorXd t = to_vector(require(target, "times"), "times");
        reg.times.assign(t.data(), t.data() + t.size());
        reg.x = to_matrix(require(target, "x"), "x");
        reg.y = to_matrix(require(target, "y"), "y");
        reg.z = to_matrix(require(target, "z"), "z");
        const auto rows = static_cast<Eigen::Index>(reg.times.size());
        if (reg.x.rows() != rows || reg.y.rows() != rows || reg.z.rows() != rows || reg.x.cols() != spec.dim() ||
            reg.z.cols() != spec.dim() || reg.y.cols() != spec.faces()) {
            throw ConfigError("x and z need p columns, y one column per face, one row per time");
        }
        const auto rc = reflection::check_regulation(reg, spec);
        check("in_domain", rc.in_domain, nullptr);
        check("monotone", rc.monotone, nullptr);
        check("starts_at_zero", rc.starts_at_zero, nullptr);
        check("complementarity_exact", (rc.complementarity.array() == 0.0).all(), jvec(rc.complementarity));
        check("identity_residual", rc.identity_residual <= 1e-9, rc.identity_residual);
    } else if (kind == "solve-fbsde") {
        const FbsdeRun run = fbsde_compute(target, o);
        out.seed = run.seed;
        const auto& r = run.report;
        auto zero = [](const Eigen::VectorXd& v) { return (v.array() == 0.0).all(); };
        check("forward_complementarity_exact", zero(r.forward_complementarity), jvec(r.forward_complementarity));
        check("backward_complementarity_exact", zero(r.backward_complementarity), jvec(r.backward_complementarity));
        check("forward_monotone", r.forward_monotone, nullptr);
        check("backward_monotone", r.backward_monotone, nullptr);
        check("forward_in_domain", r.forward_in_domain, nullptr);
        check("backward_in_domain", r.backward_in_domain, nullptr);
        check("terminal_condition", r.terminal_residual == 0.0, r.terminal_residual);
        check("growth", r.growth_violations == 0,
              Json{{"checks", r.growth_checks}, {"violations", r.growth_violations}, {"worst_ratio", r.worst_growth_ratio}});
    } else if (kind == "rbm-sim") {
        const RbmCompute c = rbm_compute(target, o);
        out.seed = c.seed;
        check("regulation", c.run.regulation_ok, jvec(c.run.complementarity));
        check("complementarity_exact", (c.run.complementarity.array() == 0.0).all(), jvec(c.run.complementarity));
    } else if (kind == "queue-sim") {
        const QueueRun run = queue_compute(target, o);
        out.seed = run.seed;
        check("flow_conservation", flow_conserved(run), jints(run.path.q_end));
    } else {
        throw ConfigError("validate targets: skorokhod, regulated-path, solve-fbsde, rbm-sim, queue-sim");
    }
    Json j;
    j["target"] = kind;
    j["checks"] = checks;
    j["ok"] = out.violations.empty();
    out.artifacts.push_back({"report.json", dump(j)});
    return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"check-matrix", "skorokhod",  "simulate-forward", "solve-fbsde",
                                                "queue-sim",    "rbm-sim",    "feynman-kac",      "hjb-eval",
                                                "game-solve",   "validate"};
    return names;
}

CommandOutput run_command(const std::string& command, const Json& cfg, const Overrides& o) {
    if (command == "check-matrix") return check_matrix(cfg, o);
    if (command == "skorokhod") return skorokhod(cfg, o);
    if (command == "simulate-forward") return simulate_forward_cmd(cfg, o);
    if (command == "solve-fbsde") return solve_fbsde(cfg, o);
    if (command == "queue-sim") return queue_sim(cfg, o);
    if (command == "rbm-sim") return rbm_sim(cfg, o);
    if (command == "feynman-kac") return feynman_kac(cfg, o);
    if (command == "hjb-eval") return hjb_eval(cfg, o);
    if (command == "game-solve") return game_solve(cfg, o);
    if (command == "validate") return validate(cfg, o);
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace skewfb::cli
