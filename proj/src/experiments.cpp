#include "rilab/experiments.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

#include <omp.h>

#include "rilab/bellman.hpp"
#include "rilab/rng.hpp"

namespace rilab::experiments {

std::string arm_name(Arm arm) {
    switch (arm) {
        case Arm::vanilla_ri: return "vanilla-RI";
        case Arm::pomdp_ri: return "pomdp-RI";
        case Arm::vanilla_non_ri: return "vanilla-nonRI";
        case Arm::pomdp_non_ri: return "pomdp-nonRI";
    }
    throw std::invalid_argument("unknown arm");
}

Arm parse_arm(const std::string& name) {
    for (Arm arm : kAllArms)
        if (arm_name(arm) == name) return arm;
    throw std::invalid_argument("unknown arm '" + name + "'");
}

std::uint64_t arm_stream(Arm arm) { return static_cast<std::uint64_t>(arm); }

grid::GridConfig env_for(Arm arm, const grid::GridConfig& base) {
    grid::GridConfig env = base;
    const bool ri = arm == Arm::vanilla_ri || arm == Arm::pomdp_ri;
    env.variant = ri ? grid::Variant::relatively_ignorable : grid::Variant::non_ignorable;
    return env;
}

agents::AgentConfig agent_for(Arm arm, const agents::AgentConfig& base) {
    agents::AgentConfig agent = base;
    const bool vanilla = arm == Arm::vanilla_ri || arm == Arm::vanilla_non_ri;
    agent.input_slice = vanilla ? agents::InputSlice::position_only : agents::InputSlice::position_and_belief;
    return agent;
}

void ExperimentConfig::validate() const {
    if (arms.empty()) throw std::invalid_argument("experiment: no arms selected");
    if (std::set<Arm>(arms.begin(), arms.end()).size() != arms.size())
        throw std::invalid_argument("experiment: arms must be distinct");
    if (seeds.empty()) throw std::invalid_argument("experiment: seeds must be nonempty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw std::invalid_argument("experiment: seeds must be distinct");
    if (episodes == 0) throw std::invalid_argument("experiment: episodes must be positive");
    if (rolling_window == 0 || rolling_window > episodes)
        throw std::invalid_argument("experiment: rolling_window must lie in [1, episodes]");
    env.validate();
    agent.validate();
}

std::vector<double> rolling_mean(std::span<const double> series, std::size_t window) {
    if (window == 0) throw std::invalid_argument("rolling_mean: window must be positive");
    if (window > series.size())
        throw std::invalid_argument("rolling_mean: window " + std::to_string(window) + " exceeds series length " +
                                    std::to_string(series.size()));
    std::vector<double> out;
    out.reserve(series.size() - window + 1);
    // each window summed afresh so every entry is exact to one rounding chain
    for (std::size_t i = window - 1; i < series.size(); ++i) {
        double sum = 0.0;
        for (std::size_t k = i + 1 - window; k <= i; ++k) sum += series[k];
        out.push_back(sum / static_cast<double>(window));
    }
    return out;
}

std::vector<double> RewardCurve::rolling(Arm arm) const {
    std::vector<double> out;
    for (const AggregateRow& row : aggregate)
        if (row.arm == arm && row.rolling_mean) out.push_back(*row.rolling_mean);
    return out;
}

double RewardCurve::final_rolling(Arm arm) const {
    const auto r = rolling(arm);
    if (r.empty()) throw std::invalid_argument("curve has no rows for arm " + arm_name(arm));
    return r.back();
}

std::optional<std::size_t> RewardCurve::sustained_from(Arm arm, double level) const {
    const auto r = rolling(arm);
    std::optional<std::size_t> from;
    for (std::size_t i = r.size(); i-- > 0;) {
        if (r[i] < level) break;
        from = i + rolling_window;  // rolling entry i belongs to episode i + window
    }
    return from;
}

RewardCurve run_experiment(const ExperimentConfig& config) {
    config.validate();
    struct Run {
        Arm arm;
        std::uint64_t seed;
    };
    std::vector<Run> runs;
    for (Arm arm : config.arms)
        for (std::uint64_t seed : config.seeds) runs.push_back({arm, seed});

    std::vector<std::vector<agents::TrainRecord>> results(runs.size());
    std::vector<std::exception_ptr> errors(runs.size());
    const int threads = config.workers > 0 ? static_cast<int>(config.workers) : omp_get_max_threads();
    const auto n = static_cast<std::ptrdiff_t>(runs.size());

#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const Run& run = runs[static_cast<std::size_t>(i)];
        try {
            results[i] = agents::train(env_for(run.arm, config.env), agent_for(run.arm, config.agent), config.episodes,
                                       run.seed, arm_stream(run.arm))
                             .records;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    RewardCurve curve;
    curve.seeds = config.seeds;
    curve.rolling_window = config.rolling_window;
    curve.raw.reserve(runs.size() * config.episodes);
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (const auto& rec : results[i]) curve.raw.push_back({runs[i].arm, runs[i].seed, rec.episode, rec.episode_return});

    const std::size_t per_arm = config.seeds.size();
    for (std::size_t a = 0; a < config.arms.size(); ++a) {
        std::vector<double> mean(config.episodes, 0.0);
        for (std::size_t s = 0; s < per_arm; ++s) {
            const auto& recs = results[a * per_arm + s];
            for (std::size_t e = 0; e < config.episodes; ++e) mean[e] += recs[e].episode_return;
        }
        for (double& m : mean) m /= static_cast<double>(per_arm);
        const auto rolled = rolling_mean(mean, config.rolling_window);
        for (std::size_t e = 0; e < config.episodes; ++e) {
            AggregateRow row{config.arms[a], e + 1, mean[e], std::nullopt};
            if (e + 1 >= config.rolling_window) row.rolling_mean = rolled[e + 1 - config.rolling_window];
            curve.aggregate.push_back(row);
        }
    }
    return curve;
}

namespace {

void full_precision(std::ostream& out) { out.precision(std::numeric_limits<double>::max_digits10); }

}  // namespace

void write_raw_csv(std::ostream& out, const RewardCurve& curve) {
    full_precision(out);
    out << "# rng: " << Rng::kRngAlgorithm << '\n';
    out << "# seeds:";
    for (auto s : curve.seeds) out << ' ' << s;
    out << '\n';
    out << "arm,seed,episode,return\n";
    for (const RawRow& row : curve.raw)
        out << arm_name(row.arm) << ',' << row.seed << ',' << row.episode << ',' << row.episode_return << '\n';
}

void write_aggregate_csv(std::ostream& out, const RewardCurve& curve) {
    full_precision(out);
    out << "arm,episode,mean_return,rolling_mean\n";
    for (const AggregateRow& row : curve.aggregate) {
        out << arm_name(row.arm) << ',' << row.episode << ',' << row.mean_return << ',';
        if (row.rolling_mean) out << *row.rolling_mean;
        out << '\n';
    }
}

namespace {

template <typename Writer>
void write_file(const std::string& path, const RewardCurve& curve, Writer writer) {
    const std::filesystem::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory for '" + path + "': " + ec.message());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    writer(out, curve);
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

void write_outputs(const ExperimentConfig& config, const RewardCurve& curve) {
    write_file(config.output, curve, write_aggregate_csv);
    if (config.raw_output) write_file(*config.raw_output, curve, write_raw_csv);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    std::vector<std::string> arms;
    for (Arm a : c.arms) arms.push_back(arm_name(a));
    j = nlohmann::json{{"arms", arms},
                       {"seeds", c.seeds},
                       {"episodes", c.episodes},
                       {"rolling_window", c.rolling_window},
                       {"env", c.env},
                       {"agent", c.agent},
                       {"output", c.output},
                       {"workers", c.workers}};
    if (c.raw_output) j["raw_output"] = *c.raw_output;
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    if (j.contains("arms")) {
        c.arms.clear();
        for (const auto& name : j.at("arms")) c.arms.push_back(parse_arm(name.get<std::string>()));
    }
    if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
    if (j.contains("episodes")) j.at("episodes").get_to(c.episodes);
    if (j.contains("rolling_window")) j.at("rolling_window").get_to(c.rolling_window);
    if (j.contains("env")) c.env = j.at("env").get<grid::GridConfig>();
    if (j.contains("agent")) c.agent = j.at("agent").get<agents::AgentConfig>();
    if (j.contains("output")) j.at("output").get_to(c.output);
    if (j.contains("raw_output") && !j.at("raw_output").is_null()) c.raw_output = j.at("raw_output").get<std::string>();
    if (j.contains("workers")) j.at("workers").get_to(c.workers);
    c.validate();
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read experiment config '" + path + "'");
    return nlohmann::json::parse(in).get<ExperimentConfig>();
}

// ------------------------------------------------------------ two states

FiniteMdp two_state_mdp(double gamma) {
    MdpDescription d;
    d.states = {{0.0}, {1.0}};
    d.actions = {{0.0}, {1.0}, {2.0}};
    d.allowable = {{0, 1}, {2}};
    d.kernel[{0, 0}] = {0.6, 0.4};
    d.kernel[{0, 1}] = {0.1, 0.9};
    d.kernel[{1, 2}] = {0.0, 1.0};
    d.reward[{0, 0}] = 1.0;
    d.reward[{0, 1}] = 2.0;
    d.reward[{1, 2}] = 0.0;
    d.gamma = gamma;
    d.initial = {0.5, 0.5};
    return FiniteMdp::build(std::move(d));
}

std::array<Policy, 2> two_state_policies(const FiniteMdp& mdp) {
    if (mdp.num_states() != 2 || mdp.num_actions() != 3)
        throw std::invalid_argument("two_state_policies: not the two-state example");
    return {Policy({{0.2, 0.8, 0.0}, {0.0, 0.0, 1.0}}), Policy({{0.8, 0.2, 0.0}, {0.0, 0.0, 1.0}})};
}

TwoStateReport run_two_state_demo(double gamma) {
    const FiniteMdp mdp = two_state_mdp(gamma);
    const auto policies = two_state_policies(mdp);
    std::array<QFunction, 2> values{evaluate_policy(mdp, policies[0]), evaluate_policy(mdp, policies[1])};
    std::array<double, 2> v0{};
    for (std::size_t k = 0; k < 2; ++k)
        for (ActionIndex a : mdp.layout().allowed(0)) v0[k] += policies[k].prob(0, a) * values[k](0, a);
    const PolicyClass cls({policies[0], policies[1]});
    return TwoStateReport{gamma,
                          values,
                          v0,
                          fixed_point(mdp, cls, 1e-12).q,
                          fixed_point(mdp, kAllDeterministic, 1e-12).q,
                          v0[1] > v0[0] ? std::size_t{1} : std::size_t{0}};
}

void to_json(nlohmann::json& j, const TwoStateReport& r) {
    j = nlohmann::json{{"gamma", r.gamma},
                       {"policies",
                        {{{"name", "pi(1|0)=0.8"}, {"q", rilab::to_json(r.policy_values[0])}, {"v0", r.initial_values[0]}},
                         {{"name", "pi(0|0)=0.8"}, {"q", rilab::to_json(r.policy_values[1])}, {"v0", r.initial_values[1]}}}},
                       {"class_fixed_point", rilab::to_json(r.class_fixed_point)},
                       {"q_star", rilab::to_json(r.optimal)},
                       {"better", r.better == 0 ? "pi(1|0)=0.8" : "pi(0|0)=0.8"}};
}

}  // namespace rilab::experiments
