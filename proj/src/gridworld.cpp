#include "rilab/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rilab/ignorability.hpp"

namespace rilab::grid {

std::pair<int, int> move_delta(ActionIndex action) {
    switch (action) {
        case kLeft: return {-1, 0};
        case kRight: return {1, 0};
        case kUp: return {0, 1};
        case kDown: return {0, -1};
    }
    throw std::invalid_argument("gridworld: action index " + std::to_string(action) + " out of range");
}

Position apply_move(Position pos, ActionIndex action) {
    const auto [dx, dy] = move_delta(action);
    constexpr int hi = static_cast<int>(kGridSize) - 1;
    return {std::clamp(pos.x + dx, 0, hi), std::clamp(pos.y + dy, 0, hi)};
}

bool is_terminal(Position pos) { return pos == kGoalSquare || pos == kTrapSquare; }

void GridConfig::validate() const {
    if (!(signal_scale > 0.0)) throw std::invalid_argument("GridConfig: signal_scale must be positive");
    if (max_steps == 0) throw std::invalid_argument("GridConfig: max_steps must be at least 1");
    if (start.x < 0 || start.y < 0 || start.x >= static_cast<int>(kGridSize) || start.y >= static_cast<int>(kGridSize))
        throw std::invalid_argument("GridConfig: start lies outside the grid");
    if (is_terminal(start)) throw std::invalid_argument("GridConfig: start must not be the goal or the trap");
}

std::optional<double> terminal_reward(const GridConfig& config, Position pos, int mode) {
    if (pos == kGoalSquare) {
        if (config.variant == Variant::non_ignorable) return mode == 0 ? -10.0 : 10.0;
        if (config.reward_convention == RewardConvention::prose) return mode == 1 ? 10.0 : 8.0;
        return mode == 0 ? 10.0 : 9.0;
    }
    if (pos == kTrapSquare) {
        if (config.variant == Variant::non_ignorable) return mode == 0 ? 10.0 : -10.0;
        if (config.reward_convention == RewardConvention::prose) return mode == 1 ? -10.0 : -8.0;
        return -10.0;
    }
    return std::nullopt;
}

std::pair<double, double> return_bounds(const GridConfig& config) {
    const double penalty = std::abs(config.step_penalty) * static_cast<double>(config.max_steps);
    return {-10.0 - penalty, 10.0};
}

double observe_signal(int mode, double scale, Rng& rng) {
    return rng.normal(static_cast<double>(mode), scale);
}

double update_belief(double prior, double obs) {
    const double p1 = std::exp(-(obs - 1.0) * (obs - 1.0) / 2.0);
    const double p0 = std::exp(-(obs - 0.0) * (obs - 0.0) / 2.0);
    return (p1 * prior) / (p1 * prior + p0 * (1.0 - prior) + 1e-8);
}

GridState reset(const GridConfig& config, Rng& rng) {
    config.validate();
    GridState state;
    state.pos = config.start;
    state.mode = rng.bernoulli(0.5) ? 1 : 0;
    state.belief = 0.5;
    state.signal = observe_signal(state.mode, config.signal_scale, rng);
    return state;
}

std::array<double, 3> observation_of(const GridState& state) {
    return {static_cast<double>(state.pos.x), static_cast<double>(state.pos.y), state.belief};
}

std::pair<GridState, StepOutcome> step(const GridState& state, const GridConfig& config, ActionIndex action, Rng& rng) {
    if (state.done) throw std::logic_error("gridworld: step called on a finished episode");
    GridState next = state;
    next.pos = apply_move(state.pos, action);
    ++next.steps;

    double reward = config.step_penalty;
    bool done = false;
    if (auto r = terminal_reward(config, next.pos, next.mode)) {
        reward = *r;
        done = true;
    }
    next.signal = observe_signal(next.mode, config.signal_scale, rng);
    next.belief = update_belief(next.belief, next.signal);
    next.done = done || next.steps >= config.max_steps;
    return {next, StepOutcome{observation_of(next), reward, next.done}};
}

// ---------------------------------------------------------------- bridge

ModeDynamics default_mode_dynamics(Variant variant) {
    return variant == Variant::relatively_ignorable ? ModeDynamics::resampled : ModeDynamics::persistent;
}

StateIndex state_index(Position pos, int mode) {
    return static_cast<StateIndex>((pos.x * static_cast<int>(kGridSize) + pos.y) * 2 + mode);
}

FiniteMdp as_finite_mdp(const GridConfig& config, const MdpOptions& options) {
    config.validate();
    const ModeDynamics dynamics = options.mode_dynamics.value_or(default_mode_dynamics(config.variant));
    MdpDescription d;
    for (int x = 0; x < static_cast<int>(kGridSize); ++x)
        for (int y = 0; y < static_cast<int>(kGridSize); ++y)
            for (int m = 0; m < 2; ++m) d.states.push_back({double(x), double(y), double(m)});
    for (ActionIndex a = 0; a < kNumActions; ++a) {
        const auto [dx, dy] = move_delta(a);
        d.actions.push_back({double(dx), double(dy)});
    }
    const std::size_t n = d.states.size();
    d.allowable.assign(n, {kLeft, kRight, kUp, kDown});
    d.initial.assign(n, 1.0 / static_cast<double>(n));
    d.gamma = options.gamma;

    for (int x = 0; x < static_cast<int>(kGridSize); ++x) {
        for (int y = 0; y < static_cast<int>(kGridSize); ++y) {
            const Position pos{x, y};
            for (int m = 0; m < 2; ++m) {
                const StateIndex s = state_index(pos, m);
                for (ActionIndex a = 0; a < kNumActions; ++a) {
                    const Position to = is_terminal(pos) ? pos : apply_move(pos, a);
                    std::vector<double> row(n, 0.0);
                    if (dynamics == ModeDynamics::persistent) {
                        row[state_index(to, m)] = 1.0;
                    } else {
                        row[state_index(to, 0)] = 0.5;
                        row[state_index(to, 1)] = 0.5;
                    }
                    d.kernel[{s, a}] = std::move(row);
                    double reward = 0.0;
                    if (!is_terminal(pos)) reward = terminal_reward(config, to, m).value_or(config.step_penalty);
                    d.reward[{s, a}] = reward;
                }
            }
        }
    }
    return FiniteMdp::build(std::move(d));
}

PolicyClass shipped_policies(const FiniteMdp& mdp) {
    return measurable_policy_class(mdp, kPositionCoordinates);
}

Policy toward_goal_policy(const FiniteMdp& mdp) {
    std::vector<ActionIndex> choice(mdp.num_states(), kLeft);
    for (int m = 0; m < 2; ++m) {
        choice[state_index({0, 0}, m)] = kUp;
        choice[state_index({1, 1}, m)] = kLeft;
    }
    return Policy::deterministic(mdp, choice);
}

// ------------------------------------------------------------------ JSON

std::string to_string(Variant v) { return v == Variant::relatively_ignorable ? "relatively_ignorable" : "non_ignorable"; }
std::string to_string(RewardConvention c) { return c == RewardConvention::prose ? "prose" : "code"; }
std::string to_string(ModeDynamics d) { return d == ModeDynamics::persistent ? "persistent" : "resampled"; }

Variant parse_variant(const std::string& s) {
    if (s == "relatively_ignorable" || s == "ri" || s == "RI") return Variant::relatively_ignorable;
    if (s == "non_ignorable" || s == "nonRI" || s == "non_ri") return Variant::non_ignorable;
    throw std::invalid_argument("unknown gridworld variant '" + s + "'");
}

RewardConvention parse_reward_convention(const std::string& s) {
    if (s == "prose") return RewardConvention::prose;
    if (s == "code") return RewardConvention::code;
    throw std::invalid_argument("unknown reward convention '" + s + "'");
}

ModeDynamics parse_mode_dynamics(const std::string& s) {
    if (s == "persistent") return ModeDynamics::persistent;
    if (s == "resampled") return ModeDynamics::resampled;
    throw std::invalid_argument("unknown mode dynamics '" + s + "'");
}

void to_json(nlohmann::json& j, const GridConfig& c) {
    j = nlohmann::json{{"variant", to_string(c.variant)},
                       {"reward_convention", to_string(c.reward_convention)},
                       {"signal_scale", c.signal_scale},
                       {"step_penalty", c.step_penalty},
                       {"max_steps", c.max_steps},
                       {"start", {c.start.x, c.start.y}}};
}

void from_json(const nlohmann::json& j, GridConfig& c) {
    c = GridConfig{};
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("reward_convention")) c.reward_convention = parse_reward_convention(j.at("reward_convention").get<std::string>());
    if (j.contains("signal_scale")) j.at("signal_scale").get_to(c.signal_scale);
    if (j.contains("step_penalty")) j.at("step_penalty").get_to(c.step_penalty);
    if (j.contains("max_steps")) j.at("max_steps").get_to(c.max_steps);
    if (j.contains("start")) {
        const auto start = j.at("start").get<std::array<int, 2>>();
        c.start = {start[0], start[1]};
    }
    c.validate();
}

}  // namespace rilab::grid
