#include "skewfb/games/games.hpp"

#include "skewfb/errors.hpp"
#include "skewfb/parallel.hpp"

#include <cmath>

namespace skewfb::games {

namespace {

std::vector<std::size_t> decode_shape(const std::vector<std::size_t>& shape, std::size_t profile) {
    std::vector<std::size_t> choice(shape.size());
    for (std::size_t l = shape.size(); l-- > 0;) {
        choice[l] = profile % shape[l];
        profile /= shape[l];
    }
    return choice;
}

std::size_t encode_shape(const std::vector<std::size_t>& shape, const std::vector<std::size_t>& choice) {
    std::size_t idx = 0;
    for (std::size_t l = 0; l < shape.size(); ++l) idx = idx * shape[l] + choice[l];
    return idx;
}

}  // namespace

PolicyGrid::PolicyGrid(std::vector<std::vector<Action>> actions) : actions_(std::move(actions)) {
    if (actions_.empty()) throw ParameterError("a game needs at least one player");
    for (const auto& set : actions_) {
        if (set.empty()) throw ParameterError("every player needs at least one action");
        for (const auto& a : set) {
            if (!a.u) throw ParameterError("action '" + a.name + "' has no feedback map");
        }
        shape_.push_back(set.size());
        profiles_ *= set.size();
    }
}

std::vector<std::size_t> PolicyGrid::decode(std::size_t profile) const {
    if (profile >= profiles_) throw ParameterError("profile index out of range");
    return decode_shape(shape_, profile);
}

std::size_t PolicyGrid::encode(const std::vector<std::size_t>& choice) const {
    if (choice.size() != shape_.size()) throw DimensionError("one action per player");
    for (std::size_t l = 0; l < choice.size(); ++l) {
        if (choice[l] >= shape_[l]) throw ParameterError("action index out of range");
    }
    return encode_shape(shape_, choice);
}

std::string PolicyGrid::label(std::size_t profile) const {
    const auto choice = decode(profile);
    std::string s;
    for (std::size_t l = 0; l < choice.size(); ++l) s += (l ? "/" : "") + actions_[l][choice[l]].name;
    return s;
}

fbsde::ControlFn PolicyGrid::control(std::size_t profile) const {
    const auto choice = decode(profile);
    std::vector<fbsde::ControlFn> parts;
    for (std::size_t l = 0; l < choice.size(); ++l) parts.push_back(actions_[l][choice[l]].u);
    return [parts](double t, const Eigen::VectorXd& x) {
        std::vector<Eigen::VectorXd> pieces;
        Eigen::Index n = 0;
        for (const auto& f : parts) {
            pieces.push_back(f(t, x));
            n += pieces.back().size();
        }
        Eigen::VectorXd u(n);
        Eigen::Index at = 0;
        for (const auto& piece : pieces) {
            u.segment(at, piece.size()) = piece;
            at += piece.size();
        }
        return u;
    };
}

ProfileValue evaluate_values(const fbsde::FBSDEProblem& problem, const PolicyGrid& grid, std::size_t profile,
                             const fbsde::PicardConfig& config, const std::vector<levy::PathGrid>* drivers) {
    if (grid.players() != problem.q()) {
        throw DimensionError("player count " + std::to_string(grid.players()) + " differs from q = " +
                             std::to_string(problem.q()));
    }
    fbsde::FBSDEProblem prob = problem;
    prob.coeffs.u = grid.control(profile);
    const fbsde::EnsembleSolution sol =
        drivers ? fbsde::picard_iterate(prob, config, *drivers) : fbsde::picard_iterate(prob, config);

    const int q = problem.q();
    ProfileValue out;
    out.diagnostics = sol.diagnostics;
    out.warnings = sol.diagnostics.warnings;
    if (sol.diagnostics.diverged) out.warnings.push_back("Picard iteration diverged for profile " + grid.label(profile));
    out.values.resize(q + 1);
    out.se.resize(q + 1);
    out.values.tail(q) = sol.backward.v0;
    out.values(0) = sol.backward.v0.sum();
    out.se.tail(q) = sol.backward.v0_se;

    const Eigen::RowVectorXd total = sol.backward.v0_paths.colwise().sum();
    const auto n = static_cast<double>(total.size());
    if (total.size() > 1) {
        const Eigen::ArrayXd dev = (total.array() - total(0)).transpose();
        const double var = std::max(0.0, (dev.square().sum() - dev.sum() * dev.sum() / n) / (n - 1.0));
        out.se(0) = std::sqrt(var / n);
    } else {
        out.se(0) = 0.0;
    }

    const fbsde::ValidationReport rep = fbsde::validate_solution(prob, sol);
    out.admissible = rep.growth_violations == 0;
    if (!out.admissible) {
        out.warnings.push_back("profile " + grid.label(profile) + " failed " + std::to_string(rep.growth_violations) +
                               " growth spot checks");
    }
    return out;
}

double GameResult::pooled_se() const {
    if (se.size() == 0 || se.cols() < 2) return 0.0;
    const Eigen::MatrixXd players = se.rightCols(se.cols() - 1);
    return std::sqrt(players.array().square().mean());
}

GameResult GameResult::from_table(std::vector<std::size_t> shape, const Eigen::MatrixXd& players) {
    std::size_t count = 1;
    for (std::size_t s : shape) count *= s;
    if (players.rows() != static_cast<Eigen::Index>(count) || players.cols() != static_cast<Eigen::Index>(shape.size())) {
        throw DimensionError("value table must be profiles x players");
    }
    GameResult r;
    r.shape = std::move(shape);
    r.values.resize(players.rows(), players.cols() + 1);
    r.values.col(0) = players.rowwise().sum();
    r.values.rightCols(players.cols()) = players;
    r.se = Eigen::MatrixXd::Zero(r.values.rows(), r.values.cols());
    r.admissible.assign(count, true);
    for (std::size_t i = 0; i < count; ++i) r.labels.push_back(std::to_string(i));
    return r;
}

std::vector<std::size_t> find_nash(const GameResult& r, double eps) {
    if (!(eps >= 0.0)) throw ParameterError("slack must be nonnegative");
    std::vector<std::size_t> out;
    const std::size_t n = r.profiles();
    for (std::size_t prof = 0; prof < n; ++prof) {
        const auto choice = decode_shape(r.shape, prof);
        bool stable = true;
        for (std::size_t l = 0; l < r.shape.size() && stable; ++l) {
            const auto col = static_cast<Eigen::Index>(l + 1);
            const double own = r.values(static_cast<Eigen::Index>(prof), col);
            auto dev = choice;
            for (std::size_t a = 0; a < r.shape[l] && stable; ++a) {
                if (a == choice[l]) continue;
                dev[l] = a;
                const double alt = r.values(static_cast<Eigen::Index>(encode_shape(r.shape, dev)), col);
                if (own < alt - eps) stable = false;
            }
        }
        if (stable) out.push_back(prof);
    }
    return out;
}

std::vector<std::size_t> find_pareto_nash(const GameResult& r, double eps) {
    const std::vector<std::size_t> nash = find_nash(r, eps);
    std::vector<std::size_t> out;
    if (nash.empty()) return out;
    const double best = r.values.col(0).maxCoeff();
    for (std::size_t prof : nash) {
        if (r.values(static_cast<Eigen::Index>(prof), 0) >= best - eps) out.push_back(prof);
    }
    return out;
}

GameResult solve_game(const fbsde::FBSDEProblem& problem, const PolicyGrid& grid, const fbsde::PicardConfig& config,
                      const GameOptions& options) {
    problem.validate();
    const int q = problem.q();
    if (grid.players() != q) throw DimensionError("player count differs from q");

    std::vector<levy::PathGrid> drivers;
    if (options.common_random_numbers) {
        drivers = fbsde::sample_drivers(problem, config.paths, config.dt, config.seed, config.threads);
    }
    fbsde::PicardConfig inner = config;
    if (options.threads > 1) inner.threads = 1;

    const std::size_t n = grid.profiles();
    std::vector<ProfileValue> vals(n);
    parallel_for(n, options.threads, [&](std::size_t prof) {
        vals[prof] = evaluate_values(problem, grid, prof, inner, options.common_random_numbers ? &drivers : nullptr);
    });

    GameResult r;
    r.shape = grid.shape();
    r.values.resize(static_cast<Eigen::Index>(n), q + 1);
    r.se.resize(static_cast<Eigen::Index>(n), q + 1);
    for (std::size_t prof = 0; prof < n; ++prof) {
        r.values.row(static_cast<Eigen::Index>(prof)) = vals[prof].values.transpose();
        r.se.row(static_cast<Eigen::Index>(prof)) = vals[prof].se.transpose();
        r.admissible.push_back(vals[prof].admissible);
        r.labels.push_back(grid.label(prof));
        for (const auto& w : vals[prof].warnings) r.warnings.push_back(grid.label(prof) + ": " + w);
    }
    r.epsilon = options.epsilon.value_or(2.0 * r.pooled_se());
    r.nash = find_nash(r, r.epsilon);
    r.pareto_nash = find_pareto_nash(r, r.epsilon);
    r.assumptions.push_back(
        "comparison principle for the value functions is assumed, not verified; equilibria are over the finite "
        "action grid only");
    if (r.pareto_nash.empty()) {
        r.warnings.push_back("no Nash profile attains the maximal total value within epsilon");
    }
    return r;
}

}  // namespace skewfb::games
