#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skewfb/errors.hpp"
#include "skewfb/games/games.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace skewfb;
using namespace skewfb::games;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Action constant_action(const std::string& name, double value) {
    return {name, [value](double, const Eigen::VectorXd&) { return vec1(value); }};
}

// dX = (u_1 + ... + u_q) dt + dW, X(0) = 0, player payoff rate x - u_l^2, H = 0.
// On [0, 1] this gives V_l = (sum u)/2 - u_l^2.
fbsde::FBSDEProblem effort_game(int q) {
    fbsde::FBSDEProblem pb;
    pb.x0 = vec1(0.0);
    pb.T = 1.0;
    auto& C = pb.coeffs;
    C.q = q;
    C.b = [](const fbsde::Args& a) { return vec1(a.u.sum()); };
    C.sigma = [](const fbsde::Args&) { return Eigen::MatrixXd::Constant(1, 1, 1.0); };
    C.c = [q](const fbsde::Args& a) {
        Eigen::VectorXd c(q);
        for (int l = 0; l < q; ++l) c(l) = a.x(0) - a.u(l) * a.u(l);
        return c;
    };
    C.H = [q](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(q); };
    C.L = [q](double) { return 1.0 + q; };
    return pb;
}

fbsde::PicardConfig quick(std::size_t paths, std::uint64_t seed) {
    fbsde::PicardConfig cfg;
    cfg.paths = paths;
    cfg.dt = 0.02;
    cfg.seed = seed;
    cfg.max_iter = 4;
    cfg.degree = 2;
    return cfg;
}

std::vector<std::size_t> brute_nash(const GameResult& r, double eps) {
    // enumerate all deviations by scanning every profile pair that differs in one coordinate
    const std::size_t n = r.profiles();
    const std::size_t q = r.shape.size();
    auto digits = [&](std::size_t idx) {
        std::vector<std::size_t> d(q);
        for (std::size_t l = q; l-- > 0;) {
            d[l] = idx % r.shape[l];
            idx /= r.shape[l];
        }
        return d;
    };
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < n; ++a) {
        bool ok = true;
        const auto da = digits(a);
        for (std::size_t b = 0; b < n && ok; ++b) {
            const auto db = digits(b);
            int diff = -1, count = 0;
            for (std::size_t l = 0; l < q; ++l) {
                if (da[l] != db[l]) {
                    diff = static_cast<int>(l);
                    ++count;
                }
            }
            if (count != 1) continue;
            if (r.values(static_cast<Eigen::Index>(a), diff + 1) < r.values(static_cast<Eigen::Index>(b), diff + 1) - eps) {
                ok = false;
            }
        }
        if (ok) out.push_back(a);
    }
    return out;
}

}  // namespace

TEST_CASE("policy grid encoding") {
    PolicyGrid g({{constant_action("a", 0), constant_action("b", 1)},
                  {constant_action("x", 0), constant_action("y", 2), constant_action("z", 3)}});
    CHECK(g.profiles() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(g.encode(g.decode(i)) == i);
    CHECK(g.decode(4) == std::vector<std::size_t>{1, 1});
    CHECK(g.label(5) == "b/z");
    const Eigen::VectorXd u = g.control(5)(0.0, vec1(0.0));
    REQUIRE(u.size() == 2);
    CHECK(u(0) == 1.0);
    CHECK(u(1) == 3.0);
    CHECK_THROWS_AS(g.decode(6), ParameterError);
    CHECK_THROWS_AS(PolicyGrid(std::vector<std::vector<Action>>{std::vector<Action>{}}), ParameterError);
}

TEST_CASE("zero payoffs give zero values") {
    auto pb = effort_game(2);
    pb.coeffs.c = nullptr;
    PolicyGrid g({{constant_action("0", 0.0)}, {constant_action("0", 0.0)}});
    const ProfileValue v = evaluate_values(pb, g, 0, quick(200, 3));
    CHECK(v.values.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(v.admissible);
}

TEST_CASE("single player with linear driver grows exponentially") {
    fbsde::FBSDEProblem pb;
    pb.x0 = vec1(0.0);
    pb.T = 1.5;
    pb.coeffs.q = 1;
    pb.coeffs.b = [](const fbsde::Args&) { return vec1(0.0); };
    pb.coeffs.sigma = [](const fbsde::Args&) { return Eigen::MatrixXd::Constant(1, 1, 1.0); };
    pb.coeffs.c_linear = Eigen::MatrixXd::Constant(1, 1, 0.4);
    pb.coeffs.H = [](const Eigen::VectorXd&) { return vec1(1.0); };
    pb.coeffs.L = [](double) { return 1.0; };
    PolicyGrid g({{constant_action("idle", 0.0)}});
    const ProfileValue v = evaluate_values(pb, g, 0, quick(100, 5));
    CHECK(v.values(1) == doctest::Approx(std::exp(0.4 * 1.5)).epsilon(1e-10));
    CHECK(v.values(0) == v.values(1));
}

TEST_CASE("total value is the exact sum of player values") {
    const auto pb = effort_game(3);
    PolicyGrid g({{constant_action("a", 0.1)}, {constant_action("b", 0.3)}, {constant_action("c", 0.7)}});
    const ProfileValue v = evaluate_values(pb, g, 0, quick(300, 8));
    CHECK(v.values(0) == v.values(1) + v.values(2) + v.values(3));
    // the payoff rates share the state so the total's SE is not the root sum of squares
    CHECK(v.se(0) > 0.0);
    CHECK(v.se(0) <= v.se(1) + v.se(2) + v.se(3) + 1e-15);
}

TEST_CASE("symmetric players receive matching values") {
    const auto pb = effort_game(2);
    PolicyGrid g({{constant_action("w", 0.5)}, {constant_action("w", 0.5)}});
    const ProfileValue v = evaluate_values(pb, g, 0, quick(2000, 21));
    CHECK(std::abs(v.values(1) - v.values(2)) <= 2.0 * std::hypot(v.se(1), v.se(2)) + 1e-12);
    CHECK(std::abs(v.values(1) - 0.25) < 4.0 * v.se(1) + 1e-2);
}

TEST_CASE("single profile is an equilibrium") {
    const GameResult r = GameResult::from_table({1, 1}, (Eigen::MatrixXd(1, 2) << -3.0, 7.0).finished());
    CHECK(find_nash(r, 0.0) == std::vector<std::size_t>{0});
    CHECK(find_pareto_nash(r, 0.0) == std::vector<std::size_t>{0});
}

TEST_CASE("empty Nash set gives empty Pareto-Nash set") {
    // matching pennies has no pure equilibrium
    Eigen::MatrixXd t(4, 2);
    t << 1, -1,  //
        -1, 1,   //
        -1, 1,   //
        1, -1;
    const GameResult r = GameResult::from_table({2, 2}, t);
    CHECK(find_nash(r, 0.0).empty());
    CHECK(find_pareto_nash(r, 0.0).empty());
}

TEST_CASE("prisoner's dilemma table") {
    // actions: 0 = cooperate, 1 = defect
    Eigen::MatrixXd t(4, 2);
    t << 3, 3,  //
        0, 5,   //
        5, 0,   //
        1, 1;
    const GameResult r = GameResult::from_table({2, 2}, t);
    CHECK(find_nash(r, 0.0) == std::vector<std::size_t>{3});
    CHECK(find_pareto_nash(r, 0.0).empty());
    CHECK(r.values(0, 0) == 6.0);
}

TEST_CASE("coordination table") {
    Eigen::MatrixXd t(4, 2);
    t << 2, 2,  //
        0, 0,   //
        0, 0,   //
        1, 1;
    const GameResult r = GameResult::from_table({2, 2}, t);
    CHECK(find_nash(r, 0.0) == std::vector<std::size_t>{0, 3});
    CHECK(find_pareto_nash(r, 0.0) == std::vector<std::size_t>{0});
    // slack large enough to swallow the payoff gap makes every profile stable
    CHECK(find_nash(r, 2.0).size() == 4);
}

TEST_CASE("constant payoffs make every profile an equilibrium") {
    const GameResult r = GameResult::from_table({3, 2, 2}, Eigen::MatrixXd::Constant(12, 3, 1.5));
    CHECK(find_nash(r, 0.0).size() == 12);
    CHECK(find_pareto_nash(r, 0.0).size() == 12);
}

TEST_CASE("equilibria are invariant under per-player shifts") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd t(12, 2);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = std::round(4.0 * u(rng));
        const GameResult a = GameResult::from_table({3, 4}, t);
        Eigen::MatrixXd s = t;
        s.col(0).array() += 2.5;
        s.col(1).array() -= 7.0;
        const GameResult b = GameResult::from_table({3, 4}, s);
        CHECK(find_nash(a, 0.0) == find_nash(b, 0.0));
    }
}

TEST_CASE("Nash search agrees with brute-force deviation scan") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> u(0, 3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::vector<std::size_t> shape{2, 3, 2};
        Eigen::MatrixXd t(12, 3);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
        const GameResult r = GameResult::from_table(shape, t);
        for (double eps : {0.0, 0.5, 1.0}) CHECK(find_nash(r, eps) == brute_nash(r, eps));
    }
}

TEST_CASE("effort game: equilibrium at the analytic best response") {
    const auto pb = effort_game(2);
    std::vector<Action> acts{constant_action("0", 0.0), constant_action("0.25", 0.25), constant_action("1", 1.0)};
    PolicyGrid g({acts, acts});
    GameOptions opt;
    opt.threads = 3;
    const GameResult r = solve_game(pb, g, quick(2000, 31), opt);
    REQUIRE(r.profiles() == 9);
    const std::size_t target = g.encode({1, 1});
    CHECK(r.nash == std::vector<std::size_t>{target});
    CHECK(r.pareto_nash == std::vector<std::size_t>{target});
    CHECK(r.epsilon == doctest::Approx(2.0 * r.pooled_se()));
    CHECK(r.epsilon < 0.0625);
    for (std::size_t prof = 0; prof < 9; ++prof) {
        const auto c = g.decode(prof);
        const double u1 = std::vector<double>{0.0, 0.25, 1.0}[c[0]];
        const double u2 = std::vector<double>{0.0, 0.25, 1.0}[c[1]];
        const auto row = static_cast<Eigen::Index>(prof);
        CHECK(std::abs(r.values(row, 1) - ((u1 + u2) / 2 - u1 * u1)) < 4.0 * r.se(row, 1) + 2e-2);
        CHECK(std::abs(r.values(row, 2) - ((u1 + u2) / 2 - u2 * u2)) < 4.0 * r.se(row, 2) + 2e-2);
        CHECK(r.admissible[prof]);
    }
    CHECK(!r.assumptions.empty());
}

TEST_CASE("profile evaluation is independent of thread count") {
    const auto pb = effort_game(2);
    std::vector<Action> acts{constant_action("0", 0.0), constant_action("1", 1.0)};
    PolicyGrid g({acts, acts});
    GameOptions one, many;
    many.threads = 4;
    const GameResult a = solve_game(pb, g, quick(200, 2), one);
    const GameResult b = solve_game(pb, g, quick(200, 2), many);
    CHECK(a.values == b.values);
    CHECK(a.se == b.se);
}

TEST_CASE("player count must match backward dimension") {
    const auto pb = effort_game(2);
    PolicyGrid g({{constant_action("a", 0.0)}});
    CHECK_THROWS_AS(evaluate_values(pb, g, 0, quick(10, 1)), DimensionError);
}
