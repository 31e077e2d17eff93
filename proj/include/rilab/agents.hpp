#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rilab/bellman.hpp"
#include "rilab/gridworld.hpp"
#include "rilab/ignorability.hpp"
#include "rilab/mlp.hpp"
#include "rilab/qfunction.hpp"
#include "rilab/rng.hpp"

namespace rilab::agents {

enum class InputSlice { position_only, position_and_belief };

std::size_t input_dim(InputSlice slice);
std::vector<double> slice_observation(const std::array<double, 3>& observation, InputSlice slice);

struct ReplayConfig {
    bool enabled = true;
    std::size_t capacity = 1000;
    std::size_t batch = 32;
};

enum class Optimizer { sgd, adam };

struct AgentConfig {
    InputSlice input_slice = InputSlice::position_only;
    double gamma = 0.9;
    double learning_rate = 0.001;
    double epsilon_start = 1.0;
    double epsilon_decay = 0.995;
    double epsilon_floor = 0.05;
    std::vector<std::size_t> hidden{64, 64};
    Optimizer optimizer = Optimizer::adam;
    ReplayConfig replay;

    /// Throws std::invalid_argument when an invariant fails.
    void validate() const;
    /// max(floor, start * decay^n) after n finished episodes.
    double epsilon_after(std::size_t episodes_done) const;
};

struct Transition {
    std::vector<double> obs;
    ActionIndex action = 0;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

struct TrainRecord {
    std::size_t episode = 0;  // from 1
    double episode_return = 0.0;
    /// Exploration rate after this episode's decay.
    double epsilon = 0.0;
    std::size_t steps = 0;

    bool operator==(const TrainRecord&) const = default;
};

nn::Mlp make_network(const AgentConfig& config, Rng& rng);

/// reward + (1 - done) * gamma * max_a' Q(next_obs, a')
double td_target(const nn::Mlp& net, const Transition& t, double gamma);

/// Loss (Q(obs, a) - target)^2 and its parameter gradient, target held constant.
std::pair<double, nn::Gradients> td_gradient(const nn::Mlp& net, const Transition& t, double gamma);
std::pair<double, nn::Gradients> td_batch_gradient(const nn::Mlp& net, std::span<const Transition> batch, double gamma);

/// One SGD step on (Q(obs, a) - target)^2 with the target held constant.
/// Returns the loss before the update.
double td_step(nn::Mlp& net, const Transition& t, const AgentConfig& config);

/// Same loss averaged over a batch, one step on the mean gradient.
double td_batch_step(nn::Mlp& net, std::span<const Transition> batch, const AgentConfig& config);

/// Lowest index among the maximal entries.
ActionIndex argmax(std::span<const double> values);

/// Epsilon-greedy over the four outputs.
ActionIndex act(const nn::Mlp& net, std::span<const double> obs, double epsilon, Rng& rng);

struct TrainResult {
    std::vector<TrainRecord> records;
    nn::Mlp network;
};

/// Online deep Q-learning on the gridworld. All randomness (initialization,
/// environment and exploration) comes from Rng(seed, stream).
TrainResult train(const grid::GridConfig& env, const AgentConfig& agent, std::size_t episodes, std::uint64_t seed,
                  std::uint64_t stream = 0);

// ------------------------------------------------------- tabular control

/// Q table indexed by (observation class, action).
struct ObservationQ {
    std::vector<std::vector<StateIndex>> classes;
    std::vector<std::size_t> class_of;  // state -> class
    std::vector<std::vector<double>> values;

    /// Q(x, a) = values[class_of[x]][a] on every allowed pair.
    QFunction lift(const FiniteMdp& mdp) const;
};

struct ObservationLearnerOptions {
    TabularOptions tabular;
    /// States at which an episode ends after the update; empty means the
    /// absorbing states of the MDP.
    std::vector<bool> terminal;
};

/// Q-learning that only sees the observation class of the current state.
/// Requires every state in a class to share one allowable set.
ObservationQ observation_q_learning(const FiniteMdp& mdp, const ObservationMap& obs, const LearningSchedule& schedule,
                                    const ObservationLearnerOptions& options, Rng& rng);

/// mu-weighted average of q over each observation class.
ObservationQ project_onto_observations(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& q);

/// max |a - b| over classes and actions; layouts must agree.
double sup_distance(const ObservationQ& a, const ObservationQ& b);

std::string to_string(InputSlice slice);
InputSlice parse_input_slice(const std::string& s);
std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& s);

void to_json(nlohmann::json& j, const AgentConfig& config);
void from_json(const nlohmann::json& j, AgentConfig& config);

}  // namespace rilab::agents
