#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "skewfb/errors.hpp"
#include "skewfb/reflection/oscillation.hpp"
#include "skewfb/reflection/skorokhod.hpp"
#include "skewfb/rng.hpp"

#include <random>
#include <sstream>

using namespace skewfb;
using namespace skewfb::reflection;

namespace {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

ReflectionSpec orthant_spec(const Eigen::MatrixXd& R) {
    return ReflectionSpec(Domain::orthant(static_cast<int>(R.rows())), R);
}

DiscretePath linear_grid(std::size_t M, double T, const std::function<Eigen::VectorXd(double)>& f,
                         int p) {
    DiscretePath z;
    z.values.resize(static_cast<Eigen::Index>(M + 1), p);
    for (std::size_t k = 0; k <= M; ++k) {
        const double t = T * static_cast<double>(k) / static_cast<double>(M);
        z.times.push_back(t);
        z.values.row(static_cast<Eigen::Index>(k)) = f(t).transpose();
    }
    return z;
}

DiscretePath brownian_path(int p, std::size_t M, std::uint64_t seed, Eigen::VectorXd x0) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> n01;
    const double dt = 1.0 / static_cast<double>(M);
    DiscretePath z;
    z.values.resize(static_cast<Eigen::Index>(M + 1), p);
    z.values.row(0) = x0.transpose();
    z.times.push_back(0.0);
    for (std::size_t k = 1; k <= M; ++k) {
        z.times.push_back(static_cast<double>(k) * dt);
        for (int c = 0; c < p; ++c) {
            const auto r = static_cast<Eigen::Index>(k);
            z.values(r, c) = z.values(r - 1, c) + std::sqrt(dt) * n01(rng);
        }
    }
    return z;
}

}  // namespace

TEST_CASE("S-matrix decisions") {
    auto one = is_s_matrix(mat({{1}}));
    CHECK(one.holds);
    REQUIRE(one.witness);
    CHECK((*one.witness)(0) == doctest::Approx(1.0));
    CHECK_FALSE(is_s_matrix(mat({{-1}})).holds);
    CHECK_FALSE(is_s_matrix(mat({{1, -2}, {-2, 1}})).holds);
    CHECK(is_s_matrix(mat({{1, -0.5}, {-0.5, 1}})).holds);
    CHECK_THROWS_AS(is_s_matrix(Eigen::MatrixXd::Ones(2, 3)), DimensionError);
}

TEST_CASE("completely-S on small matrices") {
    CHECK(is_completely_s(orthant_spec(Eigen::MatrixXd::Identity(2, 2))).holds);
    CHECK_FALSE(is_completely_s(orthant_spec(mat({{1, 0.3}, {0.2, 0}}))).holds);
    CHECK_FALSE(is_completely_s(orthant_spec(mat({{1, -2}, {-2, 1}}))).holds);
    CHECK(is_completely_s(ReflectionSpec(Domain::hyperbox(Eigen::Vector2d(1, 2)),
                                         mat({{1, 0, -1, 0}, {0, 1, 0, -1}})))
              .holds);
}

TEST_CASE("completely-S agrees with Fourier-Motzkin on all 2x2 sign matrices") {
    for (int code = 0; code < 81; ++code) {
        int c = code;
        std::vector<oracle::Row> rows(2, oracle::Row(2));
        Eigen::MatrixXd M(2, 2);
        for (int i = 0; i < 4; ++i) {
            const int v = c % 3 - 1;
            c /= 3;
            rows[i / 2][i % 2] = v;
            M(i / 2, i % 2) = v;
        }
        const CompletelySCertificate cert = is_completely_s(orthant_spec(M));
        CHECK(cert.holds == oracle::completely_s(rows));
        if (cert.holds) {
            // witnesses re-check by substitution
            for (const auto& w : cert.witnesses) {
                const auto idx = face_indices(w.faces);
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < idx.size(); ++q) s += M(idx[r], idx[q]) * w.x(q);
                    CHECK(s > 0.0);
                    CHECK(w.x(r) > 0.0);
                }
            }
        }
    }
}

TEST_CASE("spectral radius condition") {
    CHECK(spectral_radius_condition(orthant_spec(Eigen::MatrixXd::Identity(3, 3))).holds);
    const auto lower = spectral_radius_condition(orthant_spec(mat({{1, 0}, {-0.5, 1}})));
    CHECK(lower.holds);
    CHECK(lower.max_radius == doctest::Approx(0.0).epsilon(1e-12));
    const auto swap = spectral_radius_condition(orthant_spec(mat({{1, -1}, {-1, 1}})));
    CHECK_FALSE(swap.holds);
    CHECK(swap.max_radius == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(spectral_radius_condition(orthant_spec(mat({{2, 0}, {0, 1}}))),
                    NormalizationError);
    const auto fixed = normalized(orthant_spec(mat({{2, 0}, {0.4, 1}})));
    CHECK(spectral_radius_condition(fixed).holds);
    // Jordan block: rho = 0.5 although the matrix is not diagonalizable
    CHECK(spectral_radius_nonnegative(mat({{0.5, 1}, {0, 0.5}})) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("jump LCP examples") {
    const auto I = orthant_spec(Eigen::MatrixXd::Identity(2, 2));
    auto r = solve_jump_lcp(Eigen::Vector2d(0, 0), Eigen::Vector2d(-1, 2), I);
    CHECK(r.dy(0) == doctest::Approx(1.0));
    CHECK(r.dy(1) == 0.0);
    CHECK(r.dx(0) == doctest::Approx(0.0));
    CHECK(r.dx(1) == doctest::Approx(2.0));
    CHECK(r.unique);

    r = solve_jump_lcp(Eigen::Vector2d(1, 1), Eigen::Vector2d(0.3, -0.5), I);
    CHECK(r.dy.isZero());
    CHECK(r.dx.isApprox(Eigen::Vector2d(0.3, -0.5)));

    const auto L = orthant_spec(mat({{1, 0}, {-0.5, 1}}));
    r = solve_jump_lcp(Eigen::Vector2d(0, 0), Eigen::Vector2d(-1, 0), L);
    CHECK(r.dy(0) == doctest::Approx(1.0));
    CHECK(r.dy(1) == doctest::Approx(0.5));
    CHECK(r.dx.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jump LCP increment bound on random P-matrix instances") {
    Rng rng = make_rng(11);
    std::uniform_real_distribution<double> u(-0.45, 0.45);
    std::normal_distribution<double> n01;
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int p = 2 + trial % 3;
        Eigen::MatrixXd R = Eigen::MatrixXd::Identity(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (i != j) R(i, j) = u(rng) / (p - 1);
        const ReflectionSpec spec = orthant_spec(R);
        if (!spec.is_p_matrix()) continue;
        Eigen::VectorXd x(p), dz(p);
        for (int i = 0; i < p; ++i) {
            x(i) = n01(rng) > 0 ? 0.0 : std::abs(n01(rng));
            dz(i) = n01(rng);
        }
        const LcpResult res = solve_jump_lcp(x, dz, spec);
        CHECK(res.dy.minCoeff() >= 0.0);
        CHECK(spec.domain().contains(x + res.dx));
        CHECK(res.dy.cwiseAbs().maxCoeff() <=
              res.bound_constant * dz.cwiseAbs().maxCoeff() * (1 + 1e-12) + 1e-15);
        for (int i = 0; i < p; ++i) {
            if (res.dy(i) > 0) CHECK(spec.domain().on_face(i, x + res.dx));
        }
        ++checked;
    }
    CHECK(checked > 150);
}

TEST_CASE("non-completely-S reflection is reported with the step") {
    const auto bad = orthant_spec(mat({{-1}}));
    const auto z = linear_grid(10, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, -t); }, 1);
    try {
        skorokhod_solve(z, bad);
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(e.step() == 1);
    }
}

TEST_CASE("Skorohod examples for both solvers") {
    const auto spec = orthant_spec(Eigen::MatrixXd::Identity(1, 1));
    const auto down = linear_grid(100, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, -t); }, 1);
    const auto up = linear_grid(100, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, t * t); }, 1);
    for (int solver = 0; solver < 2; ++solver) {
        auto run = [&](const DiscretePath& z) {
            return solver == 0 ? skorokhod_solve(z, spec) : skorokhod_fixed_point(z, spec);
        };
        const RegulatedPath a = run(down);
        for (Eigen::Index k = 0; k < a.y.rows(); ++k) {
            CHECK(a.y(k, 0) == doctest::Approx(down.times[k]).epsilon(1e-12));
            CHECK(std::abs(a.x(k, 0)) < 1e-12);
        }
        CHECK(check_regulation(a, spec).ok());
        const RegulatedPath b = run(up);
        CHECK(b.y.isZero());
        CHECK(b.x == up.values);
    }

    const auto I2 = orthant_spec(Eigen::MatrixXd::Identity(2, 2));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto z = brownian_path(2, 500, seed, Eigen::Vector2d(0.1, 0.0));
        const RegulatedPath lcp = skorokhod_solve(z, I2);
        const RegulatedPath fp = skorokhod_fixed_point(z, I2);
        CHECK(check_regulation(lcp, I2).ok());
        CHECK(check_regulation(fp, I2).ok());
        for (int c = 0; c < 2; ++c) {
            std::vector<double> zc(z.times.size());
            for (std::size_t k = 0; k < zc.size(); ++k) zc[k] = z.values(static_cast<Eigen::Index>(k), c);
            const auto y = oracle::one_sided_regulator(zc);
            for (std::size_t k = 0; k < y.size(); ++k) {
                CHECK(std::abs(lcp.y(static_cast<Eigen::Index>(k), c) - y[k]) <= 1e-12);
                CHECK(std::abs(fp.y(static_cast<Eigen::Index>(k), c) - y[k]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("oblique orthant and hyperbox regulations are valid and solvers agree") {
    const auto spec = orthant_spec(mat({{1, -0.3, 0.2}, {0.4, 1, -0.1}, {-0.2, 0.3, 1}}));
    REQUIRE(is_completely_s(spec).holds);
    REQUIRE(spectral_radius_condition(spec).holds);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto z = random_step_path(spec, 200, 99, seed);
        const RegulatedPath a = skorokhod_solve(z, spec);
        const RegulatedPath b = skorokhod_fixed_point(z, spec);
        CHECK(check_regulation(a, spec).ok());
        CHECK(check_regulation(b, spec).ok());
        CHECK((a.y - b.y).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((a.x - b.x).cwiseAbs().maxCoeff() <= 1e-8);
    }

    const ReflectionSpec box(Domain::hyperbox(Eigen::Vector2d(1.0, 0.5)),
                             mat({{1, 0.2, -1, 0.1}, {-0.3, 1, 0.2, -1}}));
    REQUIRE(is_completely_s(box).holds);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const RegulatedPath a = skorokhod_solve(random_step_path(box, 200, 5, seed), box);
        CHECK(check_regulation(a, box).ok());
    }
}

TEST_CASE("regulation check catches a decreasing regulator") {
    const auto spec = orthant_spec(Eigen::MatrixXd::Identity(1, 1));
    const auto z = linear_grid(10, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, -t); }, 1);
    RegulatedPath reg = skorokhod_solve(z, spec);
    reg.y(5, 0) -= 0.5;
    reg.x(5, 0) -= 0.5;
    const RegulationCheck c = check_regulation(reg, spec);
    CHECK_FALSE(c.monotone);
    CHECK_FALSE(c.ok());
}

TEST_CASE("oscillation") {
    const std::vector<double> t{0, 1, 2};
    CHECK(oscillation(Eigen::MatrixXd::Constant(3, 2, 4.0), t, 0, 2) == 0.0);
    CHECK(oscillation(mat({{0}, {1}, {-1}}), t, 0, 2) == 2.0);
    CHECK(oscillation(mat({{0}, {1}, {3}}), t, 0, 2) == 3.0);
    CHECK(oscillation(mat({{0}, {1}, {3}}), t, 0.5, 0.7) == 0.0);

    // monotone in the interval
    Rng rng = make_rng(3);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd v(40, 3);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n01(rng);
    std::vector<double> tt(40);
    std::iota(tt.begin(), tt.end(), 0.0);
    for (int a = 0; a < 40; a += 3)
        for (int b = a; b < 40; b += 4)
            CHECK(oscillation(v, tt, a, b) <= oscillation(v, tt, std::max(0, a - 2), std::min(39, b + 5)));
}

TEST_CASE("modulus of continuity") {
    const auto flat = linear_grid(20, 1.0, [](double) { return Eigen::VectorXd::Constant(1, 2.0); }, 1);
    CHECK(modulus_of_continuity(flat, 0.3, 1.0) == 0.0);
    const auto jump = linear_grid(20, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, t >= 0.5 ? 1.0 : 0.0); }, 1);
    CHECK(modulus_of_continuity(jump, 0.3, 1.0) == 0.0);
    const auto line = linear_grid(10, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, t); }, 1);
    CHECK(modulus_of_continuity(line, 0.4, 1.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(modulus_of_continuity(line, 1.0, 1.0), ParameterError);
}

TEST_CASE("oscillation inequality and kappa estimates") {
    const auto one = orthant_spec(Eigen::MatrixXd::Identity(1, 1));
    for (std::uint64_t s = 0; s < 20; ++s) {
        const RegulatedPath reg = skorokhod_solve(random_step_path(one, 60, 17, s), one);
        const OscillationReport rep = check_oscillation_inequality(reg, 2.0);
        CHECK(rep.ok());
        CHECK(rep.max_ratio_x <= 2.0);
        CHECK(rep.max_ratio_y <= 2.0);
    }

    const auto up = linear_grid(30, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, 1.0 + t); }, 1);
    const OscillationReport free_rep = check_oscillation_inequality(skorokhod_solve(up, one), 1.0);
    CHECK(free_rep.max_ratio_x == doctest::Approx(1.0));
    CHECK(free_rep.max_ratio_y == 0.0);

    // One-sided map: Osc(x), Osc(y) <= Osc(z) on every interval, with equality
    // on any push-free interval, so the sampled maximum is exactly 1.
    CHECK(estimate_kappa(one, 50, 7) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(estimate_kappa(orthant_spec(Eigen::MatrixXd::Identity(3, 3)), 50, 7) ==
          doctest::Approx(1.5).epsilon(1e-12));
    CHECK_THROWS_AS(estimate_kappa(one, 0, 7), ParameterError);
}

TEST_CASE("CSV export") {
    const auto spec = orthant_spec(Eigen::MatrixXd::Identity(1, 1));
    const auto z = linear_grid(2, 1.0, [](double t) { return Eigen::VectorXd::Constant(1, -t); }, 1);
    std::ostringstream os;
    write_csv(os, skorokhod_solve(z, spec));
    CHECK(os.str() == "t,x_1,y_1\n0,0,0\n0.5,0,0.5\n1,0,1\n");
}
