#include "rilab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace rilab {

namespace {

void add(ValidationReport& report, std::string invariant, std::string message,
         std::vector<std::size_t> indices = {}) {
    report.violations.push_back({std::move(invariant), std::move(message), std::move(indices)});
}

std::string describe_pair(const StateAction& sa) {
    return "(" + std::to_string(sa.state) + "," + std::to_string(sa.action) + ")";
}

}  // namespace

bool ValidationReport::has(std::string_view invariant) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.invariant == invariant; });
}

InvalidMdp::InvalidMdp(ValidationReport report)
    : std::invalid_argument([&] {
          std::string msg = "invalid MDP:";
          for (const auto& v : report.violations) msg += " [" + v.invariant + "] " + v.message + ";";
          return msg;
      }()),
      report_(std::move(report)) {}

ValidationReport validate_mdp(const MdpDescription& mdp, std::size_t pair_cap) {
    ValidationReport report;
    const std::size_t n_states = mdp.states.size();
    const std::size_t n_actions = mdp.actions.size();

    if (n_states == 0) add(report, "states_nonempty", "state list is empty");
    if (n_actions == 0) add(report, "actions_nonempty", "action list is empty");
    for (std::size_t x = 0; x < n_states; ++x) {
        if (mdp.states[x].size() != mdp.states.front().size())
            add(report, "state_dimension", "state " + std::to_string(x) + " has a different dimension", {x});
    }
    for (std::size_t a = 0; a < n_actions; ++a) {
        if (mdp.actions[a].size() != mdp.actions.front().size())
            add(report, "action_dimension", "action " + std::to_string(a) + " has a different dimension", {a});
    }

    if (mdp.allowable.size() != n_states) {
        add(report, "allowable_size", "allowable has " + std::to_string(mdp.allowable.size()) +
                                          " entries for " + std::to_string(n_states) + " states");
    }
    std::set<StateAction> pairs;
    bool indexable = mdp.allowable.size() == n_states;
    for (std::size_t x = 0; x < mdp.allowable.size(); ++x) {
        const auto& allowed = mdp.allowable[x];
        if (allowed.empty()) add(report, "allowable_nonempty", "state " + std::to_string(x) + " has no allowable action", {x});
        std::set<ActionIndex> seen;
        for (ActionIndex a : allowed) {
            if (a >= n_actions) {
                add(report, "allowable_range", "action " + std::to_string(a) + " out of range at state " + std::to_string(x), {x, a});
                indexable = false;
                continue;
            }
            if (!seen.insert(a).second)
                add(report, "allowable_unique", "duplicate action " + std::to_string(a) + " at state " + std::to_string(x), {x, a});
            pairs.insert({x, a});
        }
    }
    if (pairs.size() > pair_cap) {
        add(report, "pair_cap", std::to_string(pairs.size()) + " allowed pairs exceed the cap of " + std::to_string(pair_cap));
        return report;
    }

    for (const auto& [sa, row] : mdp.kernel) {
        if (!pairs.contains(sa)) add(report, "kernel_domain", "kernel row defined outside Y at " + describe_pair(sa), {sa.state, sa.action});
    }
    for (const auto& [sa, r] : mdp.reward) {
        if (!pairs.contains(sa)) add(report, "reward_domain", "reward defined outside Y at " + describe_pair(sa), {sa.state, sa.action});
    }

    std::vector<bool> reachable(n_states, false);
    for (const auto& sa : pairs) {
        auto it = mdp.kernel.find(sa);
        if (it == mdp.kernel.end()) {
            add(report, "kernel_defined", "no kernel row at " + describe_pair(sa), {sa.state, sa.action});
            indexable = false;
        } else {
            const auto& row = it->second;
            if (row.size() != n_states) {
                add(report, "kernel_row_length", "kernel row at " + describe_pair(sa) + " has length " + std::to_string(row.size()), {sa.state, sa.action});
                indexable = false;
            } else {
                double sum = 0.0;
                for (std::size_t y = 0; y < n_states; ++y) {
                    const double p = row[y];
                    if (!std::isfinite(p) || p < 0.0)
                        add(report, "kernel_nonnegative", "negative or non-finite entry at " + describe_pair(sa) + " -> " + std::to_string(y), {sa.state, sa.action, y});
                    if (p > 0.0) reachable[y] = true;
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kConstructionTolerance) {
                    std::ostringstream msg;
                    msg.precision(17);
                    msg << "kernel row at " << describe_pair(sa) << " sums to " << sum;
                    add(report, "kernel_row_sum", msg.str(), {sa.state, sa.action});
                }
            }
        }
        auto rit = mdp.reward.find(sa);
        if (rit == mdp.reward.end()) {
            add(report, "reward_defined", "no reward at " + describe_pair(sa), {sa.state, sa.action});
        } else if (!std::isfinite(rit->second)) {
            add(report, "reward_finite", "non-finite reward at " + describe_pair(sa), {sa.state, sa.action});
        }
    }

    if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0))
        add(report, "gamma_range", "discount " + std::to_string(mdp.gamma) + " is outside (0,1)");

    if (mdp.initial.size() != n_states) {
        add(report, "initial_length", "initial distribution has length " + std::to_string(mdp.initial.size()));
    } else {
        double sum = 0.0;
        for (std::size_t x = 0; x < n_states; ++x) {
            if (!(mdp.initial[x] > 0.0))
                add(report, "initial_positive", "initial mass at state " + std::to_string(x) + " is not positive", {x});
            sum += mdp.initial[x];
        }
        if (std::abs(sum - 1.0) > kConstructionTolerance)
            add(report, "initial_sum", "initial distribution sums to " + std::to_string(sum));
    }

    if (indexable) {
        for (std::size_t y = 0; y < n_states; ++y) {
            if (!reachable[y]) add(report, "reachability", "state " + std::to_string(y) + " has no allowed predecessor", {y});
        }
    }
    return report;
}

// ---------------------------------------------------------------- PairLayout

PairLayout::PairLayout(const std::vector<std::vector<ActionIndex>>& allowable, std::size_t num_actions)
    : num_actions_(num_actions) {
    offsets_.reserve(allowable.size() + 1);
    offsets_.push_back(0);
    for (std::size_t x = 0; x < allowable.size(); ++x) {
        std::vector<ActionIndex> sorted = allowable[x];
        std::sort(sorted.begin(), sorted.end());
        for (ActionIndex a : sorted) {
            actions_.push_back(a);
            pairs_.push_back({x, a});
        }
        offsets_.push_back(pairs_.size());
    }
}

std::span<const ActionIndex> PairLayout::allowed(StateIndex x) const {
    return std::span<const ActionIndex>(actions_).subspan(offsets_[x], offsets_[x + 1] - offsets_[x]);
}

std::optional<std::size_t> PairLayout::find(StateIndex x, ActionIndex a) const {
    if (x >= num_states()) return std::nullopt;
    auto first = actions_.begin() + static_cast<std::ptrdiff_t>(offsets_[x]);
    auto last = actions_.begin() + static_cast<std::ptrdiff_t>(offsets_[x + 1]);
    auto it = std::lower_bound(first, last, a);
    if (it == last || *it != a) return std::nullopt;
    return static_cast<std::size_t>(it - actions_.begin());
}

std::size_t PairLayout::at(StateIndex x, ActionIndex a) const {
    if (auto p = find(x, a)) return *p;
    throw std::out_of_range("(" + std::to_string(x) + "," + std::to_string(a) + ") is not an allowed pair");
}

// ----------------------------------------------------------------- FiniteMdp

FiniteMdp FiniteMdp::build(MdpDescription description, std::size_t pair_cap) {
    ValidationReport report = validate_mdp(description, pair_cap);
    if (!report.ok()) throw InvalidMdp(std::move(report));

    FiniteMdp mdp;
    for (auto& allowed : description.allowable) std::sort(allowed.begin(), allowed.end());
    mdp.description_ = std::move(description);
    mdp.layout_ = std::make_shared<const PairLayout>(mdp.description_.allowable, mdp.description_.actions.size());

    const auto& layout = *mdp.layout_;
    mdp.row_offsets_.reserve(layout.size() + 1);
    mdp.row_offsets_.push_back(0);
    mdp.rewards_.reserve(layout.size());
    for (std::size_t p = 0; p < layout.size(); ++p) {
        const StateAction sa = layout.pair(p);
        const auto& row = mdp.description_.kernel.at(sa);
        for (std::size_t y = 0; y < row.size(); ++y) {
            if (row[y] > 0.0) mdp.transitions_.push_back({y, row[y]});
        }
        mdp.row_offsets_.push_back(mdp.transitions_.size());
        mdp.rewards_.push_back(mdp.description_.reward.at(sa));
    }
    return mdp;
}

std::size_t FiniteMdp::state_dim() const {
    return description_.states.empty() ? 0 : description_.states.front().size();
}

std::span<const Transition> FiniteMdp::transitions(std::size_t pair) const {
    return std::span<const Transition>(transitions_).subspan(row_offsets_[pair], row_offsets_[pair + 1] - row_offsets_[pair]);
}

bool FiniteMdp::is_absorbing(StateIndex x) const {
    for (std::size_t p = layout_->begin(x); p < layout_->end(x); ++p) {
        auto row = transitions(p);
        if (row.size() != 1 || row.front().next != x) return false;
    }
    return true;
}

FiniteMdp FiniteMdp::with_gamma(double gamma) const {
    MdpDescription copy = description_;
    copy.gamma = gamma;
    return build(std::move(copy));
}

// -------------------------------------------------------------------- Policy

Policy::Policy(std::size_t num_states, std::size_t num_actions)
    : probs_(num_states, std::vector<double>(num_actions, 0.0)) {}

Policy::Policy(std::vector<std::vector<double>> probs) : probs_(std::move(probs)) {}

Policy Policy::uniform(const FiniteMdp& mdp) {
    Policy policy(mdp.num_states(), mdp.num_actions());
    for (StateIndex x = 0; x < mdp.num_states(); ++x) {
        auto allowed = mdp.layout().allowed(x);
        for (ActionIndex a : allowed) policy.probs_[x][a] = 1.0 / static_cast<double>(allowed.size());
    }
    return policy;
}

Policy Policy::deterministic(const FiniteMdp& mdp, std::span<const ActionIndex> choice) {
    if (choice.size() != mdp.num_states()) throw std::invalid_argument("Policy::deterministic: one action per state required");
    Policy policy(mdp.num_states(), mdp.num_actions());
    for (StateIndex x = 0; x < choice.size(); ++x) {
        if (!mdp.layout().contains(x, choice[x]))
            throw std::invalid_argument("Policy::deterministic: action " + std::to_string(choice[x]) +
                                        " not allowed at state " + std::to_string(x));
        policy.probs_[x][choice[x]] = 1.0;
    }
    return policy;
}

ValidationReport validate_policy(const FiniteMdp& mdp, const Policy& policy) {
    ValidationReport report;
    if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
        add(report, "policy_shape", "policy is " + std::to_string(policy.num_states()) + "x" +
                                        std::to_string(policy.num_actions()) + " for a " +
                                        std::to_string(mdp.num_states()) + "x" + std::to_string(mdp.num_actions()) + " MDP");
        return report;
    }
    for (StateIndex x = 0; x < mdp.num_states(); ++x) {
        double sum = 0.0;
        for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
            const double p = policy.prob(x, a);
            if (!std::isfinite(p) || p < 0.0)
                add(report, "policy_nonnegative", "negative entry at (" + std::to_string(x) + "," + std::to_string(a) + ")", {x, a});
            if (p > 0.0 && !mdp.layout().contains(x, a))
                add(report, "policy_support", "mass on disallowed action " + std::to_string(a) + " at state " + std::to_string(x), {x, a});
            sum += p;
        }
        if (std::abs(sum - 1.0) > kConstructionTolerance)
            add(report, "policy_row_sum", "row " + std::to_string(x) + " sums to " + std::to_string(sum), {x});
    }
    return report;
}

PolicyClass::PolicyClass(std::vector<Policy> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("PolicyClass: empty policy class");
}

bool PolicyClass::covers(const FiniteMdp& mdp) const {
    for (std::size_t p = 0; p < mdp.num_pairs(); ++p) {
        const auto [x, a] = mdp.layout().pair(p);
        const bool hit = std::any_of(members_.begin(), members_.end(), [&](const Policy& pi) { return pi.prob(x, a) > 0.0; });
        if (!hit) return false;
    }
    return true;
}

// ----------------------------------------------------------------- Occupancy

OccupancyTable::OccupancyTable(std::shared_ptr<const PairLayout> layout, std::vector<std::vector<double>> slices)
    : layout_(std::move(layout)), slices_(std::move(slices)) {}

double OccupancyTable::at(std::size_t j, StateIndex x, ActionIndex a) const {
    auto p = layout_->find(x, a);
    return p ? slices_.at(j)[*p] : 0.0;
}

double OccupancyTable::slice_mass(std::size_t j) const {
    return std::accumulate(slices_.at(j).begin(), slices_.at(j).end(), 0.0);
}

bool OccupancyTable::positive_on_pairs(std::size_t j) const {
    return std::all_of(slices_.at(j).begin(), slices_.at(j).end(), [](double v) { return v > 0.0; });
}

OccupancyTable occupancy(const FiniteMdp& mdp, const Policy& policy, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("occupancy: horizon must be positive");
    if (auto report = validate_policy(mdp, policy); !report.ok())
        throw std::invalid_argument("occupancy: " + report.violations.front().message);

    const auto& layout = mdp.layout();
    std::vector<std::vector<double>> slices(horizon, std::vector<double>(layout.size(), 0.0));
    for (std::size_t p = 0; p < layout.size(); ++p) {
        const auto [x, a] = layout.pair(p);
        slices[0][p] = mdp.initial()[x] * policy.prob(x, a);
    }
    std::vector<double> state_mass(mdp.num_states());
    for (std::size_t j = 1; j < horizon; ++j) {
        std::fill(state_mass.begin(), state_mass.end(), 0.0);
        for (std::size_t p = 0; p < layout.size(); ++p) {
            const double mass = slices[j - 1][p];
            for (const auto& t : mdp.transitions(p)) state_mass[t.next] += t.prob * mass;
        }
        for (std::size_t p = 0; p < layout.size(); ++p) {
            const auto [x, a] = layout.pair(p);
            slices[j][p] = policy.prob(x, a) * state_mass[x];
        }
    }
    return OccupancyTable(mdp.shared_layout(), std::move(slices));
}

std::vector<TrajectoryStep> sample_trajectory(const FiniteMdp& mdp, const Policy& policy,
                                              std::size_t horizon, Rng& rng) {
    std::vector<TrajectoryStep> steps;
    steps.reserve(horizon);
    StateIndex x = rng.categorical(mdp.initial());
    for (std::size_t j = 0; j < horizon; ++j) {
        const ActionIndex a = rng.categorical(policy.row(x));
        const std::size_t p = mdp.layout().at(x, a);
        steps.push_back({x, a, mdp.reward(p)});
        auto row = mdp.transitions(p);
        const double u = rng.uniform();
        double acc = 0.0;
        StateIndex next = row.back().next;
        for (const auto& t : row) {
            acc += t.prob;
            if (u < acc) {
                next = t.next;
                break;
            }
        }
        x = next;
    }
    return steps;
}

// ---------------------------------------------------------------------- JSON

std::string pair_key(StateIndex x, ActionIndex a) { return std::to_string(x) + "," + std::to_string(a); }

StateAction parse_pair_key(const std::string& key) {
    const auto comma = key.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("pair key '" + key + "' is not of the form x,a");
    std::size_t used_x = 0, used_a = 0;
    const std::string xs = key.substr(0, comma), as = key.substr(comma + 1);
    const unsigned long x = std::stoul(xs, &used_x);
    const unsigned long a = std::stoul(as, &used_a);
    if (used_x != xs.size() || used_a != as.size()) throw std::invalid_argument("pair key '" + key + "' is malformed");
    return {x, a};
}

void to_json(nlohmann::json& j, const MdpDescription& mdp) {
    nlohmann::json kernel = nlohmann::json::object();
    for (const auto& [sa, row] : mdp.kernel) kernel[pair_key(sa.state, sa.action)] = row;
    nlohmann::json reward = nlohmann::json::object();
    for (const auto& [sa, r] : mdp.reward) reward[pair_key(sa.state, sa.action)] = r;
    j = nlohmann::json{{"states", mdp.states},   {"actions", mdp.actions}, {"allowable", mdp.allowable},
                       {"kernel", kernel},       {"reward", reward},       {"gamma", mdp.gamma},
                       {"initial", mdp.initial}};
}

void from_json(const nlohmann::json& j, MdpDescription& mdp) {
    mdp = MdpDescription{};
    j.at("states").get_to(mdp.states);
    j.at("actions").get_to(mdp.actions);
    j.at("allowable").get_to(mdp.allowable);
    for (const auto& [key, row] : j.at("kernel").items()) mdp.kernel[parse_pair_key(key)] = row.get<std::vector<double>>();
    for (const auto& [key, r] : j.at("reward").items()) mdp.reward[parse_pair_key(key)] = r.get<double>();
    j.at("gamma").get_to(mdp.gamma);
    j.at("initial").get_to(mdp.initial);
}

void to_json(nlohmann::json& j, const ValidationReport& report) {
    j = nlohmann::json{{"valid", report.ok()}, {"violations", nlohmann::json::array()}};
    for (const auto& v : report.violations)
        j["violations"].push_back({{"invariant", v.invariant}, {"message", v.message}, {"indices", v.indices}});
}

MdpDescription load_mdp_description(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open MDP file '" + path + "'");
    try {
        return nlohmann::json::parse(in).get<MdpDescription>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed MDP file '" + path + "': " + e.what());
    }
}

}  // namespace rilab
