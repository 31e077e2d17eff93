#include "rilab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace rilab::agents {

std::size_t input_dim(InputSlice slice) { return slice == InputSlice::position_only ? 2 : 3; }

std::vector<double> slice_observation(const std::array<double, 3>& observation, InputSlice slice) {
    return {observation.begin(), observation.begin() + static_cast<std::ptrdiff_t>(input_dim(slice))};
}

void AgentConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("AgentConfig: gamma must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("AgentConfig: learning_rate must be positive");
    if (!(epsilon_decay > 0.0 && epsilon_decay < 1.0))
        throw std::invalid_argument("AgentConfig: epsilon_decay must lie in (0, 1)");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_floor >= 0.0 && epsilon_floor <= 1.0))
        throw std::invalid_argument("AgentConfig: epsilon values must lie in [0, 1]");
    for (std::size_t h : hidden)
        if (h == 0) throw std::invalid_argument("AgentConfig: hidden layer sizes must be positive");
    if (replay.enabled && (replay.batch == 0 || replay.capacity < replay.batch))
        throw std::invalid_argument("AgentConfig: replay needs 0 < batch <= capacity");
}

double AgentConfig::epsilon_after(std::size_t episodes_done) const {
    return std::max(epsilon_floor, epsilon_start * std::pow(epsilon_decay, static_cast<double>(episodes_done)));
}

nn::Mlp make_network(const AgentConfig& config, Rng& rng) {
    std::vector<std::size_t> sizes{input_dim(config.input_slice)};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(grid::kNumActions);
    return nn::Mlp::glorot(std::move(sizes), rng);
}

ActionIndex argmax(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax of an empty vector");
    ActionIndex best = 0;
    for (ActionIndex a = 1; a < values.size(); ++a)
        if (values[a] > values[best]) best = a;
    return best;
}

double td_target(const nn::Mlp& net, const Transition& t, double gamma) {
    if (t.done) return t.reward;
    const auto next = net.forward(t.next_obs);
    return t.reward + gamma * next[argmax(next)];
}

namespace {

// Adds weight * grad of (Q(obs,a) - target)^2 into acc; returns the loss.
double accumulate(const nn::Mlp& net, const Transition& t, double gamma, double weight, nn::Gradients& acc) {
    const double target = td_target(net, t, gamma);
    const auto q = net.forward(t.obs);
    if (t.action >= q.size()) throw std::invalid_argument("td_step: action out of range");
    const double diff = q[t.action] - target;
    std::vector<double> out_grad(q.size(), 0.0);
    out_grad[t.action] = 2.0 * diff * weight;
    const auto g = net.backward(t.obs, out_grad);
    for (std::size_t l = 0; l < g.size(); ++l) {
        for (std::size_t i = 0; i < g[l].weights.size(); ++i) acc[l].weights[i] += g[l].weights[i];
        for (std::size_t i = 0; i < g[l].biases.size(); ++i) acc[l].biases[i] += g[l].biases[i];
    }
    return diff * diff;
}

}  // namespace

std::pair<double, nn::Gradients> td_gradient(const nn::Mlp& net, const Transition& t, double gamma) {
    auto grads = nn::zero_gradients(net);
    const double loss = accumulate(net, t, gamma, 1.0, grads);
    return {loss, std::move(grads)};
}

std::pair<double, nn::Gradients> td_batch_gradient(const nn::Mlp& net, std::span<const Transition> batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("td_batch_gradient: empty batch");
    auto grads = nn::zero_gradients(net);
    const double w = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const Transition& t : batch) loss += accumulate(net, t, gamma, w, grads);
    return {loss * w, std::move(grads)};
}

double td_step(nn::Mlp& net, const Transition& t, const AgentConfig& config) {
    auto [loss, grads] = td_gradient(net, t, config.gamma);
    net.apply(grads, config.learning_rate);
    return loss;
}

double td_batch_step(nn::Mlp& net, std::span<const Transition> batch, const AgentConfig& config) {
    auto [loss, grads] = td_batch_gradient(net, batch, config.gamma);
    net.apply(grads, config.learning_rate);
    return loss;
}

ActionIndex act(const nn::Mlp& net, std::span<const double> obs, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("act: epsilon must lie in [0, 1]");
    if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.index(net.output_dim());
    const auto q = net.forward(obs);
    return argmax(q);
}

TrainResult train(const grid::GridConfig& env, const AgentConfig& agent, std::size_t episodes, std::uint64_t seed,
                  std::uint64_t stream) {
    env.validate();
    agent.validate();
    Rng rng(seed, stream);
    TrainResult result{{}, make_network(agent, rng)};
    nn::Mlp& net = result.network;
    result.records.reserve(episodes);

    std::deque<Transition> buffer;
    std::vector<Transition> batch;
    nn::Adam adam(net);
    auto update = [&](const nn::Gradients& grads) {
        if (agent.optimizer == Optimizer::adam)
            adam.step(net, grads, agent.learning_rate);
        else
            net.apply(grads, agent.learning_rate);
    };

    for (std::size_t episode = 1; episode <= episodes; ++episode) {
        const double epsilon = agent.epsilon_after(episode - 1);
        grid::GridState state = grid::reset(env, rng);
        auto obs = slice_observation(grid::observation_of(state), agent.input_slice);
        TrainRecord record{episode, 0.0, 0.0, 0};

        while (!state.done) {
            const ActionIndex a = act(net, obs, epsilon, rng);
            auto [next, outcome] = grid::step(state, env, a, rng);
            // hitting the step cap truncates the episode but is not terminal
            Transition t{obs, a, outcome.reward, slice_observation(outcome.observation, agent.input_slice),
                         grid::is_terminal(next.pos)};
            if (agent.replay.enabled) {
                buffer.push_back(t);
                if (buffer.size() > agent.replay.capacity) buffer.pop_front();
                if (buffer.size() >= agent.replay.batch) {
                    batch.clear();
                    for (std::size_t b = 0; b < agent.replay.batch; ++b) batch.push_back(buffer[rng.index(buffer.size())]);
                    update(td_batch_gradient(net, batch, agent.gamma).second);
                }
            } else {
                update(td_gradient(net, t, agent.gamma).second);
            }
            record.episode_return += outcome.reward;
            ++record.steps;
            obs = std::move(t.next_obs);
            state = next;
        }
        record.epsilon = agent.epsilon_after(episode);
        result.records.push_back(record);
    }
    return result;
}

// ------------------------------------------------------- tabular control

QFunction ObservationQ::lift(const FiniteMdp& mdp) const {
    QFunction q(mdp);
    const auto& layout = mdp.layout();
    for (std::size_t p = 0; p < layout.size(); ++p) {
        const auto [x, a] = layout.pair(p);
        q[p] = values[class_of[x]][a];
    }
    return q;
}

namespace {

ObservationQ empty_table(const FiniteMdp& mdp, const ObservationMap& obs) {
    ObservationQ table;
    table.classes = equivalence_classes(mdp, obs);
    table.class_of.assign(mdp.num_states(), 0);
    for (std::size_t c = 0; c < table.classes.size(); ++c) {
        const auto& cls = table.classes[c];
        const auto ref = mdp.layout().allowed(cls.front());
        for (StateIndex x : cls) {
            table.class_of[x] = c;
            const auto allowed = mdp.layout().allowed(x);
            if (!std::equal(allowed.begin(), allowed.end(), ref.begin(), ref.end()))
                throw std::invalid_argument("observation learner: allowable sets differ inside an observation class");
        }
    }
    table.values.assign(table.classes.size(), std::vector<double>(mdp.num_actions(), 0.0));
    return table;
}

ActionIndex greedy_in_class(const FiniteMdp& mdp, const ObservationQ& table, std::size_t c) {
    const auto allowed = mdp.layout().allowed(table.classes[c].front());
    ActionIndex best = allowed.front();
    for (ActionIndex a : allowed)
        if (table.values[c][a] > table.values[c][best]) best = a;
    return best;
}

}  // namespace

ObservationQ observation_q_learning(const FiniteMdp& mdp, const ObservationMap& obs, const LearningSchedule& schedule,
                                    const ObservationLearnerOptions& options, Rng& rng) {
    if (!options.terminal.empty() && options.terminal.size() != mdp.num_states())
        throw std::invalid_argument("observation learner: terminal mask has the wrong length");
    ObservationQ table = empty_table(mdp, obs);
    std::vector<std::vector<std::size_t>> visits(table.classes.size(), std::vector<std::size_t>(mdp.num_actions(), 0));
    const auto& layout = mdp.layout();
    const TabularOptions& tab = options.tabular;
    auto terminal = [&](StateIndex x) { return options.terminal.empty() ? mdp.is_absorbing(x) : bool(options.terminal[x]); };

    for (std::size_t episode = 0; episode < tab.episodes; ++episode) {
        const double epsilon = tab.epsilon.at(episode);
        StateIndex x = rng.categorical(mdp.initial());
        for (std::size_t step = 0; step < tab.max_steps; ++step) {
            const std::size_t c = table.class_of[x];
            const auto allowed = layout.allowed(x);
            const ActionIndex a = rng.uniform() < epsilon ? allowed[rng.index(allowed.size())] : greedy_in_class(mdp, table, c);
            const std::size_t pair = layout.at(x, a);

            const auto row = mdp.transitions(pair);
            const double u = rng.uniform();
            double acc = 0.0;
            StateIndex next = row.back().next;
            for (const auto& tr : row) {
                acc += tr.prob;
                if (u < acc) {
                    next = tr.next;
                    break;
                }
            }
            const std::size_t nc = table.class_of[next];
            const double target = mdp.reward(pair) + mdp.gamma() * table.values[nc][greedy_in_class(mdp, table, nc)];
            const double alpha = schedule(++visits[c][a]);
            table.values[c][a] = (1.0 - alpha) * table.values[c][a] + alpha * target;

            if (tab.stop_at_absorbing && terminal(x)) break;
            x = next;
        }
    }
    return table;
}

ObservationQ project_onto_observations(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& q) {
    ObservationQ table = empty_table(mdp, obs);
    const auto mu = mdp.initial();
    for (std::size_t c = 0; c < table.classes.size(); ++c) {
        double mass = 0.0;
        for (StateIndex x : table.classes[c]) mass += mu[x];
        for (ActionIndex a : mdp.layout().allowed(table.classes[c].front())) {
            double v = 0.0;
            for (StateIndex x : table.classes[c]) v += mu[x] * q(x, a);
            table.values[c][a] = v / mass;
        }
    }
    return table;
}

double sup_distance(const ObservationQ& a, const ObservationQ& b) {
    if (a.values.size() != b.values.size()) throw std::invalid_argument("sup_distance: class counts differ");
    double d = 0.0;
    for (std::size_t c = 0; c < a.values.size(); ++c) {
        if (a.values[c].size() != b.values[c].size()) throw std::invalid_argument("sup_distance: action counts differ");
        for (std::size_t i = 0; i < a.values[c].size(); ++i) d = std::max(d, std::abs(a.values[c][i] - b.values[c][i]));
    }
    return d;
}

// ------------------------------------------------------------------ JSON

std::string to_string(InputSlice slice) {
    return slice == InputSlice::position_only ? "position_only" : "position_and_belief";
}

std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    throw std::invalid_argument("unknown optimizer '" + s + "'");
}

InputSlice parse_input_slice(const std::string& s) {
    if (s == "position_only") return InputSlice::position_only;
    if (s == "position_and_belief") return InputSlice::position_and_belief;
    throw std::invalid_argument("unknown input slice '" + s + "'");
}

void to_json(nlohmann::json& j, const AgentConfig& c) {
    j = nlohmann::json{{"input_slice", to_string(c.input_slice)},
                       {"gamma", c.gamma},
                       {"learning_rate", c.learning_rate},
                       {"epsilon_start", c.epsilon_start},
                       {"epsilon_decay", c.epsilon_decay},
                       {"epsilon_floor", c.epsilon_floor},
                       {"hidden", c.hidden},
                       {"optimizer", to_string(c.optimizer)},
                       {"replay", {{"enabled", c.replay.enabled}, {"capacity", c.replay.capacity}, {"batch", c.replay.batch}}}};
}

void from_json(const nlohmann::json& j, AgentConfig& c) {
    c = AgentConfig{};
    if (j.contains("input_slice")) c.input_slice = parse_input_slice(j.at("input_slice").get<std::string>());
    if (j.contains("gamma")) j.at("gamma").get_to(c.gamma);
    if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
    if (j.contains("epsilon_start")) j.at("epsilon_start").get_to(c.epsilon_start);
    if (j.contains("epsilon_decay")) j.at("epsilon_decay").get_to(c.epsilon_decay);
    if (j.contains("epsilon_floor")) j.at("epsilon_floor").get_to(c.epsilon_floor);
    if (j.contains("hidden")) j.at("hidden").get_to(c.hidden);
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    if (j.contains("replay")) {
        const auto& r = j.at("replay");
        if (r.contains("enabled")) r.at("enabled").get_to(c.replay.enabled);
        if (r.contains("capacity")) r.at("capacity").get_to(c.replay.capacity);
        if (r.contains("batch")) r.at("batch").get_to(c.replay.batch);
    }
    c.validate();
}

}  // namespace rilab::agents
