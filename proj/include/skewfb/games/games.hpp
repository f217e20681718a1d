#pragma once

#include "skewfb/fbsde/fbsde.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace skewfb::games {

/// A named feedback map u_l(t, x) for one player.
struct Action {
    std::string name;
    fbsde::ControlFn u;
};

/// Product grid of per-player action sets. Profile indices are mixed-radix
/// with the last player varying fastest.
class PolicyGrid {
public:
    explicit PolicyGrid(std::vector<std::vector<Action>> actions);

    int players() const noexcept { return static_cast<int>(actions_.size()); }
    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t profiles() const noexcept { return profiles_; }
    std::vector<std::size_t> decode(std::size_t profile) const;
    std::size_t encode(const std::vector<std::size_t>& choice) const;
    /// Action names joined by '/'.
    std::string label(std::size_t profile) const;
    /// Concatenation of the players' controls under the profile.
    fbsde::ControlFn control(std::size_t profile) const;

private:
    std::vector<std::vector<Action>> actions_;
    std::vector<std::size_t> shape_;
    std::size_t profiles_ = 1;
};

struct ProfileValue {
    Eigen::VectorXd values;  // (q+1): total, then players
    Eigen::VectorXd se;
    fbsde::PicardDiagnostics diagnostics;
    /// Growth spot checks of validate_solution passed.
    bool admissible = true;
    std::vector<std::string> warnings;
};

/// Runs picard_iterate with the profile's control installed. Player l's
/// value is backward component l; the total is their per-path sum, so its
/// standard error accounts for correlation between players. Pass `drivers`
/// to share driver realizations across profiles.
ProfileValue evaluate_values(const fbsde::FBSDEProblem& problem, const PolicyGrid& grid, std::size_t profile,
                             const fbsde::PicardConfig& config,
                             const std::vector<levy::PathGrid>* drivers = nullptr);

struct GameResult {
    std::vector<std::size_t> shape;
    std::vector<std::string> labels;
    Eigen::MatrixXd values;  // profiles x (q+1); column 0 = sum of the rest
    Eigen::MatrixXd se;
    std::vector<bool> admissible;
    std::vector<std::size_t> nash;
    std::vector<std::size_t> pareto_nash;
    double epsilon = 0.0;
    std::vector<std::string> assumptions;
    std::vector<std::string> warnings;

    int players() const noexcept { return static_cast<int>(shape.size()); }
    std::size_t profiles() const noexcept { return static_cast<std::size_t>(values.rows()); }
    /// sqrt of the mean squared player standard error.
    double pooled_se() const;

    /// Noise-free result from a profiles x q table of player values; the
    /// total column is formed here.
    static GameResult from_table(std::vector<std::size_t> shape, const Eigen::MatrixXd& players);
};

struct GameOptions {
    bool common_random_numbers = true;
    /// Profiles evaluated concurrently; each solve runs single-threaded.
    unsigned threads = 1;
    /// Default: 2 x pooled standard error.
    std::optional<double> epsilon;
};

/// Evaluates every profile and fills the Nash and Pareto-Nash sets.
GameResult solve_game(const fbsde::FBSDEProblem& problem, const PolicyGrid& grid, const fbsde::PicardConfig& config,
                      const GameOptions& options = {});

/// Profiles where no player gains more than eps by a unilateral deviation.
std::vector<std::size_t> find_nash(const GameResult& result, double eps);
/// Nash profiles whose total is within eps of the grid-wide maximum total.
/// Empty when no Nash profile attains it.
std::vector<std::size_t> find_pareto_nash(const GameResult& result, double eps);

}  // namespace skewfb::games
