#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rilab/rng.hpp"

namespace rilab {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// Sum-to-one tolerance applied to inputs at construction time.
inline constexpr double kConstructionTolerance = 1e-12;
/// Tolerance for quantities obtained by propagating probabilities forward.
inline constexpr double kPropagationTolerance = 1e-10;
/// Default upper bound on the number of allowed state-action pairs.
inline constexpr std::size_t kDefaultPairCap = 1'000'000;

struct StateAction {
    StateIndex state = 0;
    ActionIndex action = 0;
    auto operator<=>(const StateAction&) const = default;
};

/// Unvalidated MDP tuple, field-for-field the JSON interchange format.
/// Kernel rows are dense over states; rewards are keyed by allowed pair.
struct MdpDescription {
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> actions;
    std::vector<std::vector<ActionIndex>> allowable;
    std::map<StateAction, std::vector<double>> kernel;
    std::map<StateAction, double> reward;
    double gamma = 0.9;
    std::vector<double> initial;
};

struct Violation {
    std::string invariant;
    std::string message;
    std::vector<std::size_t> indices;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(std::string_view invariant) const;
};

/// Checks every structural and probabilistic side condition of the tuple.
/// Violations are returned as data; nothing throws.
ValidationReport validate_mdp(const MdpDescription& mdp, std::size_t pair_cap = kDefaultPairCap);

class InvalidMdp : public std::invalid_argument {
public:
    explicit InvalidMdp(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Enumeration of Y = U_x {x} x A_x. Pairs are numbered state-major, with
/// actions ascending inside each state.
class PairLayout {
public:
    PairLayout(const std::vector<std::vector<ActionIndex>>& allowable, std::size_t num_actions);

    std::size_t size() const { return pairs_.size(); }
    std::size_t num_states() const { return offsets_.size() - 1; }
    std::size_t num_actions() const { return num_actions_; }

    std::size_t begin(StateIndex x) const { return offsets_[x]; }
    std::size_t end(StateIndex x) const { return offsets_[x + 1]; }
    std::span<const ActionIndex> allowed(StateIndex x) const;
    StateAction pair(std::size_t p) const { return pairs_[p]; }

    std::optional<std::size_t> find(StateIndex x, ActionIndex a) const;
    /// Throws std::out_of_range when (x, a) is not an allowed pair.
    std::size_t at(StateIndex x, ActionIndex a) const;
    bool contains(StateIndex x, ActionIndex a) const { return find(x, a).has_value(); }

    bool operator==(const PairLayout&) const = default;

private:
    std::size_t num_actions_;
    std::vector<std::size_t> offsets_;
    std::vector<ActionIndex> actions_;
    std::vector<StateAction> pairs_;
};

struct Transition {
    StateIndex next;
    double prob;
};

/// Validated, immutable finite MDP with compressed-row transitions
/// (one row per allowed pair, zero-probability entries dropped).
class FiniteMdp {
public:
    /// Throws InvalidMdp carrying the report when validation fails.
    static FiniteMdp build(MdpDescription description, std::size_t pair_cap = kDefaultPairCap);

    const MdpDescription& description() const { return description_; }
    const PairLayout& layout() const { return *layout_; }
    const std::shared_ptr<const PairLayout>& shared_layout() const { return layout_; }

    std::size_t num_states() const { return layout_->num_states(); }
    std::size_t num_actions() const { return layout_->num_actions(); }
    std::size_t num_pairs() const { return layout_->size(); }
    std::size_t state_dim() const;

    std::span<const double> state(StateIndex x) const { return description_.states[x]; }
    std::span<const Transition> transitions(std::size_t pair) const;
    double reward(std::size_t pair) const { return rewards_[pair]; }
    std::span<const double> rewards() const { return rewards_; }
    double gamma() const { return description_.gamma; }
    std::span<const double> initial() const { return description_.initial; }

    /// CSR view used by the operator kernels.
    std::span<const std::size_t> row_offsets() const { return row_offsets_; }
    std::span<const Transition> all_transitions() const { return transitions_; }

    /// True when every allowed action at x returns to x with probability one.
    bool is_absorbing(StateIndex x) const;

    FiniteMdp with_gamma(double gamma) const;

private:
    FiniteMdp() = default;

    MdpDescription description_;
    std::shared_ptr<const PairLayout> layout_;
    std::vector<std::size_t> row_offsets_;
    std::vector<Transition> transitions_;
    std::vector<double> rewards_;
};

/// Stationary stochastic policy, dense over (state, action).
class Policy {
public:
    Policy() = default;
    Policy(std::size_t num_states, std::size_t num_actions);
    explicit Policy(std::vector<std::vector<double>> probs);

    static Policy uniform(const FiniteMdp& mdp);
    static Policy deterministic(const FiniteMdp& mdp, std::span<const ActionIndex> choice);

    std::size_t num_states() const { return probs_.size(); }
    std::size_t num_actions() const { return probs_.empty() ? 0 : probs_.front().size(); }
    double prob(StateIndex x, ActionIndex a) const { return probs_[x][a]; }
    std::span<const double> row(StateIndex x) const { return probs_[x]; }
    void set(StateIndex x, ActionIndex a, double p) { probs_.at(x).at(a) = p; }

    bool operator==(const Policy&) const = default;

private:
    std::vector<std::vector<double>> probs_;
};

/// Support inside the allowable sets and unit row sums (1e-12).
ValidationReport validate_policy(const FiniteMdp& mdp, const Policy& policy);

/// Nonempty class of policies over one MDP.
class PolicyClass {
public:
    explicit PolicyClass(std::vector<Policy> members);

    std::span<const Policy> members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    const Policy& operator[](std::size_t i) const { return members_[i]; }

    /// Every allowed pair receives positive probability from some member.
    bool covers(const FiniteMdp& mdp) const;

private:
    std::vector<Policy> members_;
};

/// P(X_j = x, A_j = a) for j < horizon, stored per allowed pair.
class OccupancyTable {
public:
    OccupancyTable(std::shared_ptr<const PairLayout> layout, std::vector<std::vector<double>> slices);

    std::size_t horizon() const { return slices_.size(); }
    /// Zero for pairs outside Y.
    double at(std::size_t j, StateIndex x, ActionIndex a) const;
    std::span<const double> slice(std::size_t j) const { return slices_[j]; }
    double slice_mass(std::size_t j) const;
    bool positive_on_pairs(std::size_t j) const;

private:
    std::shared_ptr<const PairLayout> layout_;
    std::vector<std::vector<double>> slices_;
};

/// Exact forward recursion for the state-action marginals. Throws
/// std::invalid_argument when the policy is invalid for the MDP.
OccupancyTable occupancy(const FiniteMdp& mdp, const Policy& policy, std::size_t horizon);

struct TrajectoryStep {
    StateIndex state;
    ActionIndex action;
    double reward;
};

std::vector<TrajectoryStep> sample_trajectory(const FiniteMdp& mdp, const Policy& policy,
                                              std::size_t horizon, Rng& rng);

// JSON interchange: kernel and reward maps are keyed by "x,a".
std::string pair_key(StateIndex x, ActionIndex a);
StateAction parse_pair_key(const std::string& key);

void to_json(nlohmann::json& j, const MdpDescription& mdp);
void from_json(const nlohmann::json& j, MdpDescription& mdp);
void to_json(nlohmann::json& j, const ValidationReport& report);

MdpDescription load_mdp_description(const std::string& path);

}  // namespace rilab
