#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rilab/agents.hpp"
#include "rilab/gridworld.hpp"
#include "rilab/mdp.hpp"
#include "rilab/qfunction.hpp"

namespace rilab::experiments {

enum class Arm { vanilla_ri, pomdp_ri, vanilla_non_ri, pomdp_non_ri };
inline constexpr std::array<Arm, 4> kAllArms{Arm::vanilla_ri, Arm::pomdp_ri, Arm::vanilla_non_ri, Arm::pomdp_non_ri};

/// "vanilla-RI", "pomdp-RI", "vanilla-nonRI", "pomdp-nonRI"
std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);
/// Stable stream id of an arm, independent of which arms a run selects.
std::uint64_t arm_stream(Arm arm);

grid::GridConfig env_for(Arm arm, const grid::GridConfig& base);
agents::AgentConfig agent_for(Arm arm, const agents::AgentConfig& base);

struct ExperimentConfig {
    std::vector<Arm> arms{kAllArms.begin(), kAllArms.end()};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t episodes = 1000;
    std::size_t rolling_window = 50;
    grid::GridConfig env;
    agents::AgentConfig agent;
    /// Aggregate CSV.
    std::string output = "results/figure.csv";
    /// Raw per-run CSV; skipped when unset.
    std::optional<std::string> raw_output;
    /// Worker threads; 0 uses the available parallelism.
    std::size_t workers = 0;

    /// Throws std::invalid_argument: empty or repeated arms/seeds, zero
    /// episodes, or a window outside [1, episodes].
    void validate() const;
};

struct RawRow {
    Arm arm;
    std::uint64_t seed;
    std::size_t episode;
    double episode_return;
};

struct AggregateRow {
    Arm arm;
    std::size_t episode;
    double mean_return;
    std::optional<double> rolling_mean;  // from episode == window onward
};

struct RewardCurve {
    std::vector<RawRow> raw;
    std::vector<AggregateRow> aggregate;
    std::vector<std::uint64_t> seeds;
    std::size_t rolling_window = 0;

    /// Rolling means of one arm, episode `window` first.
    std::vector<double> rolling(Arm arm) const;
    /// Rolling mean at the last episode. Throws if the arm is absent.
    double final_rolling(Arm arm) const;
    /// First episode from which the rolling mean stays >= level until the end.
    std::optional<std::size_t> sustained_from(Arm arm, double level) const;
};

/// output[i] = mean(series[i .. i + window - 1]); length n - window + 1.
/// Throws std::invalid_argument when window is 0 or exceeds the length.
std::vector<double> rolling_mean(std::span<const double> series, std::size_t window);

/// Trains every arm x seed (in parallel) and aggregates seed means first,
/// then trailing rolling means. Performs no I/O.
RewardCurve run_experiment(const ExperimentConfig& config);

void write_raw_csv(std::ostream& out, const RewardCurve& curve);
void write_aggregate_csv(std::ostream& out, const RewardCurve& curve);
/// Writes config.output (and config.raw_output); parent directories are
/// created. Throws std::runtime_error naming the path on failure.
void write_outputs(const ExperimentConfig& config, const RewardCurve& curve);

void to_json(nlohmann::json& j, const ExperimentConfig& config);
void from_json(const nlohmann::json& j, ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::string& path);

// ------------------------------------------------------------ two states

/// The worked two-state example at discount gamma.
FiniteMdp two_state_mdp(double gamma);
/// pi(1|0) = 0.8 first, pi(0|0) = 0.8 second.
std::array<Policy, 2> two_state_policies(const FiniteMdp& mdp);

struct TwoStateReport {
    double gamma;
    std::array<QFunction, 2> policy_values;
    std::array<double, 2> initial_values;  // V^pi(0)
    QFunction class_fixed_point;
    QFunction optimal;
    std::size_t better;  // index of the policy with the larger V^pi(0)
};

TwoStateReport run_two_state_demo(double gamma);
void to_json(nlohmann::json& j, const TwoStateReport& report);

}  // namespace rilab::experiments
