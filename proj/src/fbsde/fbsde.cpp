#include "skewfb/fbsde/fbsde.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/parallel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace skewfb::fbsde {

namespace {

double maxabs(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd column_as(const Eigen::MatrixXd& store, Eigen::Index k, int rows, int cols) {
    if (store.size() == 0) return Eigen::MatrixXd::Zero(rows, cols);
    return Eigen::Map<const Eigen::MatrixXd>(store.col(k).data(), rows, cols);
}

Eigen::VectorXd column_or_zero(const Eigen::MatrixXd& store, Eigen::Index k, int rows) {
    if (store.size() == 0) return Eigen::VectorXd::Zero(rows);
    return store.col(k);
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what, double t) {
    if (!m.allFinite()) {
        throw CoefficientError(std::string(what) + " is not finite at t = " + std::to_string(t));
    }
}

void require_shape(const Eigen::Ref<const Eigen::MatrixXd>& m, Eigen::Index rows, Eigen::Index cols,
                   const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + " must be " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

// |w|_nu^2 for a linear-in-z jump field with coefficient matrix w (q x h).
double jump_norm_sq(const Eigen::MatrixXd& w, const levy::LevyDriver& driver) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const double m = maxabs(w.col(j));
        s += driver.rates[uj] * driver.marks[uj].second_moment() * m * m;
    }
    return s;
}

// Jump counts and compensated mark sums for step k.
void jump_increments(const levy::PathGrid& grid, const levy::LevyDriver& driver, std::size_t k,
                     Eigen::VectorXd& counts, Eigen::VectorXd& marks) {
    const auto h = static_cast<std::size_t>(driver.h());
    counts = levy::compensated_increment(grid, driver, k,
                                         std::vector<levy::Integrand>(h, levy::Integrand::affine(1.0, 0.0)));
    marks = levy::compensated_increment(grid, driver, k,
                                        std::vector<levy::Integrand>(h, levy::Integrand::affine(0.0, 1.0)));
}

}  // namespace

void FBSDEProblem::validate() const {
    if (x0.size() < 1) throw DimensionError("initial state must be nonempty");
    if (coeffs.q < 1) throw DimensionError("backward dimension q must be positive");
    if (!coeffs.b || !coeffs.sigma || !coeffs.H || !coeffs.L) {
        throw ParameterError("coefficient set needs b, sigma, H and L");
    }
    if (!(T > 0.0)) throw ParameterError("horizon must be positive");
    driver.validate();
    if (coeffs.c_linear.size() != 0) require_shape(coeffs.c_linear, q(), q(), "c_linear");
    if (forward_reflection) {
        if (forward_reflection->dim() != p()) throw DimensionError("forward reflection dimension differs from x0");
        if (!forward_reflection->domain().contains(x0)) throw ParameterError("x0 must lie in D");
    }
    if (backward_reflection && backward_reflection->dim() != q()) {
        throw DimensionError("backward reflection dimension differs from q");
    }
}

BackwardFields BackwardFields::zeros(int q, int d, int h, int bbar, std::size_t steps) {
    const auto n = static_cast<Eigen::Index>(steps);
    return {Eigen::MatrixXd::Zero(q, n), Eigen::MatrixXd::Zero(q * d, n), Eigen::MatrixXd::Zero(q * h, n),
            Eigen::MatrixXd::Zero(bbar, n)};
}

ForwardPath simulate_forward(const FBSDEProblem& problem, const levy::PathGrid& grid,
                             const BackwardFields& frozen) {
    const int p = problem.p(), q = problem.q(), d = problem.d(), h = problem.h();
    const std::size_t M = grid.steps();
    if (grid.dW.cols() != d || grid.compensator.cols() != h) {
        throw DimensionError("path grid does not match the problem's driver");
    }
    const auto& C = problem.coeffs;
    ForwardPath out;
    out.X.resize(p, static_cast<Eigen::Index>(M + 1));
    out.Y = Eigen::MatrixXd::Zero(problem.b(), static_cast<Eigen::Index>(M + 1));
    out.X.col(0) = problem.x0;
    const Eigen::VectorXd no_control;

    Eigen::VectorXd counts, marks;
    for (std::size_t k = 0; k < M; ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        const double t = grid.times[k];
        const double dt = grid.dt(k);
        const Eigen::VectorXd x = out.X.col(c);
        const Eigen::VectorXd v = column_or_zero(frozen.V, c, q);
        const Eigen::MatrixXd vbar = column_as(frozen.Vbar, c, q, d);
        const Eigen::MatrixXd vt = column_as(frozen.Vtilde, c, q, h);
        const Eigen::VectorXd u = C.u ? C.u(t, x) : no_control;
        const Args a{t, x, v, vbar, vt, u};

        const Eigen::VectorXd drift = C.b(a);
        require_shape(drift, p, 1, "b");
        require_finite(drift, "b", t);
        const Eigen::MatrixXd sig = C.sigma(a);
        require_shape(sig, p, d, "sigma");
        require_finite(sig, "sigma", t);
        Eigen::VectorXd xf = x + drift * dt + sig * grid.dW.row(c).transpose();
        if (C.eta && h > 0) {
            const AffineJump J = C.eta(a);
            require_shape(J.A, p, h, "eta.A");
            require_shape(J.B, p, h, "eta.B");
            jump_increments(grid, problem.driver, k, counts, marks);
            xf += J.A * counts + J.B * marks;
        }
        if (problem.forward_reflection) {
            const auto& spec = *problem.forward_reflection;
            reflection::LcpResult res;
            try {
                res = reflection::solve_jump_lcp(xf, Eigen::VectorXd::Zero(p), spec);
            } catch (const InfeasibleError&) {
                throw InfeasibleError("forward push has no admissible active set", static_cast<std::ptrdiff_t>(k + 1));
            }
            if (!res.unique) out.nonunique_steps.push_back(k + 1);
            out.Y.col(c + 1) = out.Y.col(c) + res.dy;
            out.X.col(c + 1) = xf + spec.matrix() * res.dy;
        } else {
            out.X.col(c + 1) = xf;
        }
    }
    return out;
}

BackwardEnsemble solve_backward_lsmc(const FBSDEProblem& problem,
                                     const std::vector<levy::PathGrid>& grids,
                                     const std::vector<ForwardPath>& forward,
                                     const LsmcOptions& options) {
    const std::size_t N = forward.size();
    if (N == 0 || grids.size() != N) throw DimensionError("backward solve needs one driver per forward path");
    const int p = problem.p(), q = problem.q(), d = problem.d(), h = problem.h(), bb = problem.bbar();
    const std::size_t M = grids.front().steps();
    const auto& C = problem.coeffs;
    const Eigen::VectorXd no_control;

    BackwardEnsemble out;
    out.fields.assign(N, BackwardFields::zeros(q, d, h, bb, M + 1));
    out.value_fits.resize(M);
    out.r2.assign(M, 1.0);
    std::vector<Eigen::MatrixXd> dF(N, Eigen::MatrixXd::Zero(bb, static_cast<Eigen::Index>(M + 1)));

    const auto mEnd = static_cast<Eigen::Index>(M);
    parallel_for(N, options.threads, [&](std::size_t i) {
        if (forward[i].X.cols() != mEnd + 1) throw GridError("forward paths must share the driver grid");
        const Eigen::VectorXd xT = forward[i].X.col(mEnd);
        const Eigen::VectorXd hv = C.H(xT);
        require_shape(hv, q, 1, "H");
        if (problem.backward_reflection && !problem.backward_reflection->domain().contains(hv)) {
            throw ParameterError("terminal value H(X(T)) lies outside D-bar");
        }
        out.fields[i].V.col(mEnd) = hv;
    });

    std::vector<double> Ez2(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) Ez2[static_cast<std::size_t>(j)] = problem.driver.marks[static_cast<std::size_t>(j)].second_moment();

    const int width = q + q * d + q * h;
    Eigen::MatrixXd features(static_cast<Eigen::Index>(N), p);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(N), width);
    // Pathwise backward value: terminal payoff carried back with the same
    // driver and pushes but without projection. Its mean matches V(0); its
    // spread gives the Monte Carlo standard error.
    Eigen::VectorXd pathwise(static_cast<Eigen::Index>(N * static_cast<std::size_t>(q)));
    for (std::size_t i = 0; i < N; ++i) pathwise.segment(static_cast<Eigen::Index>(i) * q, q) = out.fields[i].V.col(mEnd);

    for (std::size_t kk = M; kk-- > 0;) {
        const auto k = static_cast<Eigen::Index>(kk);
        const double t = grids.front().times[kk];
        const double dt = grids.front().dt(kk);
        const Eigen::MatrixXd expA =
            C.c_linear.size() ? Eigen::MatrixXd((C.c_linear * dt).exp()) : Eigen::MatrixXd::Identity(q, q);

        parallel_for(N, options.threads, [&](std::size_t i) {
            const auto r = static_cast<Eigen::Index>(i);
            features.row(r) = forward[i].X.col(k).transpose();
            const Eigen::VectorXd vn = out.fields[i].V.col(k + 1);
            targets.row(r).head(q) = vn.transpose();
            for (int j = 0; j < d; ++j) {
                targets.row(r).segment(q + q * j, q) = (vn * (grids[i].dW(k, j) / dt)).transpose();
            }
            if (h > 0) {
                Eigen::VectorXd counts, marks;
                jump_increments(grids[i], problem.driver, kk, counts, marks);
                for (int j = 0; j < h; ++j) {
                    const double scale =
                        problem.driver.rates[static_cast<std::size_t>(j)] * dt * Ez2[static_cast<std::size_t>(j)];
                    targets.row(r).segment(q + q * d + q * j, q) = (vn * (marks(j) / scale)).transpose();
                }
            }
        });

        std::vector<std::string> notes;
        PolyFit fit = PolyFit::fit(features, targets, options.degree, &notes);
        for (auto& n : notes) out.warnings.push_back("step " + std::to_string(kk) + ": " + n);
        out.r2[kk] = fit.r2().head(q).mean();

        parallel_for(N, options.threads, [&](std::size_t i) {
            const Eigen::VectorXd x = forward[i].X.col(k);
            const Eigen::RowVectorXd pred = fit(x);
            const Eigen::VectorXd E = pred.head(q).transpose();
            const Eigen::MatrixXd vbar = Eigen::Map<const Eigen::MatrixXd>(pred.data() + q, q, d);
            const Eigen::MatrixXd vt = Eigen::Map<const Eigen::MatrixXd>(pred.data() + q + q * d, q, h);
            const Eigen::VectorXd u = C.u ? C.u(t, x) : no_control;

            Eigen::VectorXd vfree = expA * E;
            auto yh = pathwise.segment(static_cast<Eigen::Index>(i) * q, q);
            yh = expA * yh;
            if (C.c) {
                const Eigen::VectorXd cv = C.c(Args{t, x, E, vbar, vt, u});
                require_shape(cv, q, 1, "c");
                require_finite(cv, "c", t);
                vfree += dt * cv;
                yh += dt * cv;
            }
            BackwardFields& f = out.fields[i];
            if (problem.backward_reflection) {
                const auto& spec = *problem.backward_reflection;
                reflection::LcpResult res;
                try {
                    res = reflection::solve_jump_lcp(vfree, Eigen::VectorXd::Zero(q), spec);
                } catch (const InfeasibleError&) {
                    throw InfeasibleError("backward push has no admissible active set", k);
                }
                dF[i].col(k) = res.dy;
                f.V.col(k) = vfree + spec.matrix() * res.dy;
                yh += spec.matrix() * res.dy;
            } else {
                f.V.col(k) = vfree;
            }
            f.Vbar.col(k) = pred.segment(q, q * d).transpose();
            f.Vtilde.col(k) = pred.segment(q + q * d, q * h).transpose();
        });
        out.value_fits[kk] = std::move(fit);
    }

    for (std::size_t i = 0; i < N; ++i) {
        BackwardFields& f = out.fields[i];
        if (bb == 0) continue;
        f.F.col(0) = dF[i].col(0);
        for (Eigen::Index k = 1; k <= mEnd; ++k) f.F.col(k) = f.F.col(k - 1) + dF[i].col(k);
    }

    out.v0 = Eigen::VectorXd::Zero(q);
    for (const auto& f : out.fields) out.v0 += f.V.col(0);
    out.v0 /= static_cast<double>(N);
    out.v0_se = Eigen::VectorXd::Zero(q);
    if (N > 1) {
        // shifted two-pass variance: exactly zero when all paths agree
        const Eigen::Map<const Eigen::MatrixXd> Y0(pathwise.data(), q, static_cast<Eigen::Index>(N));
        const Eigen::MatrixXd dev = Y0.colwise() - Y0.col(0);
        const Eigen::VectorXd s1 = dev.rowwise().sum();
        const Eigen::VectorXd s2 = dev.array().square().rowwise().sum();
        const Eigen::VectorXd var =
            ((s2.array() - s1.array().square() / static_cast<double>(N)) / static_cast<double>(N - 1)).cwiseMax(0.0);
        out.v0_se = (var / static_cast<double>(N)).cwiseSqrt();
    }
    out.v0_paths = Eigen::Map<const Eigen::MatrixXd>(pathwise.data(), q, static_cast<Eigen::Index>(N));
    return out;
}

double derivative_weight(int order, double max_l1) {
    if (order < 0) throw ParameterError("derivative order must be nonnegative");
    if (order == 0) return 1.0;
    if (!std::isfinite(max_l1)) return 0.0;
    const double c = order;
    const double eta = std::pow(max_l1, c);
    const double log_den = std::lgamma(std::pow(c, 10.0) + 1.0) + std::lgamma(eta + 1.0) + c;
    return std::exp(-log_den);
}

double weighted_norm(const EnsembleSolution& a, const EnsembleSolution& b,
                     const levy::LevyDriver& driver, const NormOptions& options) {
    if (a.times != b.times) throw GridError("ensembles live on different grids");
    if (a.forward.size() != b.forward.size() || a.backward.fields.size() != a.forward.size() ||
        b.backward.fields.size() != b.forward.size()) {
        throw GridError("ensembles have different path counts");
    }
    if (options.derivative_order < 0 || options.derivative_order > 2) {
        throw ParameterError("derivative order must be 0, 1 or 2");
    }
    const std::size_t N = a.forward.size();
    if (N == 0) return 0.0;
    const auto M = static_cast<Eigen::Index>(a.times.size()) - 1;
    const double g2 = 2.0 * options.gamma;
    const int h = driver.h();

    std::vector<double> xi(static_cast<std::size_t>(options.derivative_order + 1));
    for (int c = 0; c <= options.derivative_order; ++c) xi[static_cast<std::size_t>(c)] = derivative_weight(c, options.max_l1);

    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const auto& fa = a.backward.fields[i];
        const auto& fb = b.backward.fields[i];
        const int q = static_cast<int>(fa.V.rows());
        double sup = 0.0, integral = 0.0;
        std::vector<double> dsup(xi.size(), 0.0);
        for (Eigen::Index k = 0; k <= M; ++k) {
            const double w = std::exp(g2 * a.times[static_cast<std::size_t>(k)]);
            const double dx = maxabs(a.forward[i].X.col(k) - b.forward[i].X.col(k));
            const double dv = maxabs(fa.V.col(k) - fb.V.col(k));
            sup = std::max(sup, (dx * dx + dv * dv) * w);
            if (k < M) {
                const double dt = a.times[static_cast<std::size_t>(k + 1)] - a.times[static_cast<std::size_t>(k)];
                const double dvb = maxabs(fa.Vbar.col(k) - fb.Vbar.col(k));
                double jn = 0.0;
                if (h > 0) {
                    const Eigen::VectorXd diff = fa.Vtilde.col(k) - fb.Vtilde.col(k);
                    jn = jump_norm_sq(Eigen::Map<const Eigen::MatrixXd>(diff.data(), q, h), driver);
                }
                integral += dt * w * (dvb * dvb + jn);

                for (int c = 1; c <= options.derivative_order; ++c) {
                    if (xi[static_cast<std::size_t>(c)] == 0.0) continue;
                    const auto& pa = a.backward.value_fits[static_cast<std::size_t>(k)];
                    const auto& pb = b.backward.value_fits[static_cast<std::size_t>(k)];
                    const Eigen::VectorXd x = a.forward[i].X.col(k);
                    auto dvf = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
                        return (pa(y).head(q) - pb(y).head(q)).transpose();
                    };
                    double worst = 0.0;
                    const Eigen::Index p = x.size();
                    for (Eigen::Index j = 0; j < p; ++j) {
                        const double hj = 1e-4 * (1.0 + std::abs(x(j)));
                        Eigen::VectorXd xp = x, xm = x;
                        xp(j) += hj;
                        xm(j) -= hj;
                        if (c == 1) {
                            worst = std::max(worst, maxabs((dvf(xp) - dvf(xm)) / (2.0 * hj)));
                        } else {
                            for (Eigen::Index l = 0; l < p; ++l) {
                                const double hl = 1e-3 * (1.0 + std::abs(x(l)));
                                Eigen::VectorXd pp = xp, pm = xp, mp = xm, mm = xm;
                                pp(l) += hl; pm(l) -= hl; mp(l) += hl; mm(l) -= hl;
                                worst = std::max(worst, maxabs((dvf(pp) - dvf(pm) - dvf(mp) + dvf(mm)) /
                                                               (4.0 * hj * hl)));
                            }
                        }
                    }
                    dsup[static_cast<std::size_t>(c)] =
                        std::max(dsup[static_cast<std::size_t>(c)], worst * worst * w);
                }
            }
        }
        double path_total = sup + integral;
        for (int c = 1; c <= options.derivative_order; ++c) {
            path_total += xi[static_cast<std::size_t>(c)] * dsup[static_cast<std::size_t>(c)];
        }
        total += path_total;
    }
    return total / static_cast<double>(N);
}

std::vector<levy::PathGrid> sample_drivers(const FBSDEProblem& problem, std::size_t paths, double dt,
                                           std::uint64_t seed, unsigned threads) {
    if (paths == 0) throw ParameterError("need at least one path");
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    const auto M = static_cast<std::size_t>(std::max(1.0, std::round(problem.T / dt)));
    const auto times = levy::uniform_grid(problem.T, M);
    std::vector<levy::PathGrid> grids(paths);
    parallel_for(paths, threads, [&](std::size_t i) { grids[i] = levy::sample_path_grid(problem.driver, times, seed, i); });
    return grids;
}

EnsembleSolution picard_iterate(const FBSDEProblem& problem, const PicardConfig& config) {
    problem.validate();
    return picard_iterate(problem, config, sample_drivers(problem, config.paths, config.dt, config.seed, config.threads));
}

EnsembleSolution picard_iterate(const FBSDEProblem& problem, const PicardConfig& config,
                                const std::vector<levy::PathGrid>& grids) {
    problem.validate();
    if (config.max_iter < 1) throw ParameterError("max_iter must be at least 1");
    if (config.derivative_order < 0 || config.derivative_order > 2) {
        throw ParameterError("derivative order must be 0, 1 or 2");
    }
    if (grids.empty()) throw ParameterError("need at least one path");
    const std::size_t N = grids.size();
    const std::size_t steps = grids.front().times.size();

    PicardDiagnostics diag;
    double Lmax = 0.0;
    for (double t : grids.front().times) Lmax = std::max(Lmax, problem.coeffs.L(t));
    diag.gamma = config.gamma ? *config.gamma : (Lmax > 0.0 ? 1.0 / (2.0 * Lmax * Lmax * problem.T) : 0.0);
    diag.derivative_order = config.derivative_order;
    const double max_l1 = problem.backward_reflection ? problem.backward_reflection->domain().max_l1()
                                                      : std::numeric_limits<double>::infinity();
    for (int c = 0; c <= config.derivative_order; ++c) diag.xi.push_back(derivative_weight(c, max_l1));
    const NormOptions norm_opts{diag.gamma, config.derivative_order, max_l1};

    const BackwardFields zero = BackwardFields::zeros(problem.q(), problem.d(), problem.h(), problem.bbar(), steps);
    const LsmcOptions lsmc{config.degree, config.threads};

    EnsembleSolution prev, cur;
    int streak = 0;
    for (int n = 1; n <= config.max_iter; ++n) {
        cur = EnsembleSolution{};
        cur.times = grids.front().times;
        cur.forward.resize(N);
        try {
            parallel_for(N, config.threads, [&](std::size_t i) {
                cur.forward[i] = simulate_forward(problem, grids[i], n == 1 ? zero : prev.backward.fields[i]);
            });
            cur.backward = solve_backward_lsmc(problem, grids, cur.forward, lsmc);
        } catch (const Error& e) {
            if (n < 3) throw;
            diag.diverged = true;
            diag.warnings.push_back("iteration " + std::to_string(n) + " failed (" + e.what() +
                                    "); returning the previous iterate");
            prev.diagnostics = diag;
            return prev;
        }
        diag.iterations = n;
        if (n >= 2) {
            const double norm = weighted_norm(cur, prev, problem.driver, norm_opts);
            diag.norms.push_back(norm);
            if (!std::isfinite(norm)) {
                diag.diverged = true;
                diag.warnings.push_back("divergence: non-finite iterate difference at iteration " + std::to_string(n));
                break;
            }
            if (norm < config.tol) {
                diag.converged = true;
                break;
            }
            if (diag.norms.size() >= 2) {
                const double ratio = norm / diag.norms[diag.norms.size() - 2];
                streak = ratio >= 1.0 ? streak + 1 : 0;
                if (streak >= config.divergence_window) {
                    diag.diverged = true;
                    diag.warnings.push_back("divergence: norm ratio >= 1 for " + std::to_string(streak) +
                                            " consecutive iterations (last " + std::to_string(ratio) + ")");
                    break;
                }
            }
        }
        prev = std::move(cur);
        cur = EnsembleSolution{};
    }
    // the loop either broke with `cur` holding the newest iterate or ran out
    // after moving it into `prev`
    EnsembleSolution out = cur.forward.empty() ? std::move(prev) : std::move(cur);
    if (!diag.converged && !diag.diverged) {
        diag.warnings.push_back("Picard iteration reached max_iter without meeting the tolerance");
    }
    out.diagnostics = diag;
    return out;
}

bool ValidationReport::ok() const {
    auto zero = [](const Eigen::VectorXd& v) { return v.size() == 0 || (v.array() == 0.0).all(); };
    return terminal_residual == 0.0 && zero(forward_complementarity) && zero(backward_complementarity) &&
           forward_monotone && backward_monotone && forward_in_domain && backward_in_domain &&
           growth_violations == 0;
}

ValidationReport validate_solution(const FBSDEProblem& problem, const EnsembleSolution& solution) {
    ValidationReport rep;
    const int q = problem.q(), d = problem.d(), h = problem.h();
    rep.forward_complementarity = Eigen::VectorXd::Zero(problem.b());
    rep.backward_complementarity = Eigen::VectorXd::Zero(problem.bbar());
    const std::size_t N = solution.forward.size();
    if (N == 0 || solution.backward.fields.size() != N) {
        rep.findings.push_back("solution has no paths or mismatched backward fields");
        rep.terminal_residual = std::numeric_limits<double>::infinity();
        return rep;
    }
    const auto M = static_cast<Eigen::Index>(solution.times.size()) - 1;
    const auto& C = problem.coeffs;
    const Eigen::VectorXd no_control;
    const std::size_t stride = static_cast<std::size_t>(std::max<Eigen::Index>(1, M / 20));
    const std::size_t path_stride = std::max<std::size_t>(1, N / 200);

    for (std::size_t i = 0; i < N; ++i) {
        const auto& fw = solution.forward[i];
        const auto& bw = solution.backward.fields[i];
        const Eigen::VectorXd hv = C.H(fw.X.col(M));
        rep.terminal_residual = std::max(rep.terminal_residual, maxabs(bw.V.col(M) - hv));

        if (problem.forward_reflection) {
            const auto& D = problem.forward_reflection->domain();
            if ((fw.Y.col(0).array() != 0.0).any()) rep.forward_monotone = false;
            for (Eigen::Index k = 0; k <= M; ++k) {
                const Eigen::VectorXd x = fw.X.col(k);
                if (!D.contains(x)) rep.forward_in_domain = false;
                if (k == 0) continue;
                for (int f = 0; f < D.faces(); ++f) {
                    const double dy = fw.Y(f, k) - fw.Y(f, k - 1);
                    if (dy < 0.0) rep.forward_monotone = false;
                    if (dy > 0.0 && !D.on_face(f, x)) rep.forward_complementarity(f) += dy;
                }
            }
        }
        if (problem.backward_reflection) {
            const auto& D = problem.backward_reflection->domain();
            for (Eigen::Index k = 0; k <= M; ++k) {
                const Eigen::VectorXd v = bw.V.col(k);
                if (!D.contains(v)) rep.backward_in_domain = false;
                for (int f = 0; f < D.faces(); ++f) {
                    const double dF = k == 0 ? bw.F(f, 0) : bw.F(f, k) - bw.F(f, k - 1);
                    if (dF < 0.0) rep.backward_monotone = false;
                    if (dF > 0.0 && !D.on_face(f, v)) rep.backward_complementarity(f) += dF;
                }
            }
        }

        if (i % path_stride != 0) continue;
        for (Eigen::Index k = 0; k < M; k += static_cast<Eigen::Index>(stride)) {
            const double t = solution.times[static_cast<std::size_t>(k)];
            const Eigen::VectorXd x = fw.X.col(k);
            const Eigen::VectorXd v = bw.V.col(k);
            const Eigen::MatrixXd vbar = column_as(bw.Vbar, k, q, d);
            const Eigen::MatrixXd vt = column_as(bw.Vtilde, k, q, h);
            const Eigen::VectorXd u = C.u ? C.u(t, x) : no_control;
            const Args a{t, x, v, vbar, vt, u};
            const double scale =
                C.L(t) * (1.0 + maxabs(x) + maxabs(v) + maxabs(vbar) + std::sqrt(jump_norm_sq(vt, problem.driver)));
            auto check = [&](double norm, const char* name) {
                ++rep.growth_checks;
                const double ratio = scale > 0.0 ? norm / scale : (norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
                rep.worst_growth_ratio = std::max(rep.worst_growth_ratio, ratio);
                if (ratio > 1.0 + 1e-12) {
                    if (rep.growth_violations == 0) {
                        rep.findings.push_back(std::string("growth bound exceeded by ") + name + " at t = " +
                                               std::to_string(t));
                    }
                    ++rep.growth_violations;
                }
            };
            check(maxabs(C.b(a)), "b");
            check(maxabs(C.sigma(a)), "sigma");
            if (C.eta && h > 0) {
                const AffineJump J = C.eta(a);
                check(std::max(maxabs(J.A), maxabs(J.B)), "eta");
            }
            Eigen::VectorXd cv = C.c_linear.size() ? Eigen::VectorXd(C.c_linear * v) : Eigen::VectorXd::Zero(q);
            if (C.c) cv += C.c(a);
            check(maxabs(cv), "c");
        }
    }

    if (rep.terminal_residual != 0.0) rep.findings.push_back("terminal condition V(T) = H(X(T)) violated");
    if ((rep.forward_complementarity.array() != 0.0).any()) rep.findings.push_back("forward regulator pushes off the boundary");
    if ((rep.backward_complementarity.array() != 0.0).any()) rep.findings.push_back("backward regulator pushes off the boundary");
    if (!rep.forward_monotone) rep.findings.push_back("forward regulator Y decreases or does not start at 0");
    if (!rep.backward_monotone) rep.findings.push_back("backward regulator F decreases");
    if (!rep.forward_in_domain) rep.findings.push_back("X leaves D");
    if (!rep.backward_in_domain) rep.findings.push_back("V leaves D-bar");
    return rep;
}

}  // namespace skewfb::fbsde
