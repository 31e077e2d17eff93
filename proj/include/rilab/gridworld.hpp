#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "rilab/mdp.hpp"
#include "rilab/rng.hpp"

// 2x2 gridworld with a latent mode. Positions are (x, y); the goal sits at
// (0,1) and the trap at (1,0) unless the non-ignorable mode swaps them.
namespace rilab::grid {

enum class Variant { relatively_ignorable, non_ignorable };
enum class RewardConvention { prose, code };
/// How the mode evolves in the finite-MDP bridge.
enum class ModeDynamics { persistent, resampled };

enum Move : ActionIndex { kLeft = 0, kRight = 1, kUp = 2, kDown = 3 };
inline constexpr std::size_t kNumActions = 4;
inline constexpr std::size_t kGridSize = 2;

struct Position {
    int x = 0;
    int y = 0;
    bool operator==(const Position&) const = default;
};

inline constexpr Position kGoalSquare{0, 1};
inline constexpr Position kTrapSquare{1, 0};

std::pair<int, int> move_delta(ActionIndex action);
Position apply_move(Position pos, ActionIndex action);
bool is_terminal(Position pos);

struct GridConfig {
    Variant variant = Variant::relatively_ignorable;
    RewardConvention reward_convention = RewardConvention::prose;
    double signal_scale = 0.15;
    double step_penalty = -0.1;
    std::size_t max_steps = 50;
    Position start{0, 0};

    /// Throws std::invalid_argument on a non-positive scale, a zero step cap
    /// or a terminal/off-grid start.
    void validate() const;
};

struct GridState {
    Position pos;
    int mode = 0;
    double signal = 0.0;
    double belief = 0.5;
    std::size_t steps = 0;
    bool done = false;
};

struct StepOutcome {
    std::array<double, 3> observation{};  // (pos_x, pos_y, belief)
    double reward = 0.0;
    bool done = false;
};

/// Reward collected on arriving at a terminal square, nullopt elsewhere.
std::optional<double> terminal_reward(const GridConfig& config, Position pos, int mode);

/// (lower, upper) bounds on any episodic return.
std::pair<double, double> return_bounds(const GridConfig& config);

double observe_signal(int mode, double scale, Rng& rng);
double update_belief(double prior, double obs);

GridState reset(const GridConfig& config, Rng& rng);
/// Throws std::logic_error when the episode is already finished.
std::pair<GridState, StepOutcome> step(const GridState& state, const GridConfig& config, ActionIndex action, Rng& rng);
std::array<double, 3> observation_of(const GridState& state);

// ------------------------------------------------------------- MDP bridge

ModeDynamics default_mode_dynamics(Variant variant);

struct MdpOptions {
    double gamma = 0.9;
    std::optional<ModeDynamics> mode_dynamics;  // default_mode_dynamics(variant) when unset
};

/// Full-state MDP over (x, y, mode); the terminal squares are absorbing with
/// zero reward, the initial law is uniform over all eight states.
FiniteMdp as_finite_mdp(const GridConfig& config, const MdpOptions& options = {});

StateIndex state_index(Position pos, int mode);
inline constexpr std::array<std::size_t, 2> kPositionCoordinates{0, 1};
inline constexpr std::size_t kModeCoordinate = 2;

/// Uniform policy and every deterministic position-only policy.
PolicyClass shipped_policies(const FiniteMdp& mdp);
/// Up from (0,0) and left from (1,1): heads straight for (0,1).
Policy toward_goal_policy(const FiniteMdp& mdp);

std::string to_string(Variant v);
std::string to_string(RewardConvention c);
std::string to_string(ModeDynamics d);
Variant parse_variant(const std::string& s);
RewardConvention parse_reward_convention(const std::string& s);
ModeDynamics parse_mode_dynamics(const std::string& s);

void to_json(nlohmann::json& j, const GridConfig& config);
void from_json(const nlohmann::json& j, GridConfig& config);

}  // namespace rilab::grid
