#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "rilab/bellman.hpp"
#include "rilab/experiments.hpp"
#include "rilab/gridworld.hpp"
#include "rilab/ignorability.hpp"
#include "rilab/mdp.hpp"
#include "rilab/rng.hpp"

namespace rilab::cli {
namespace {

using nlohmann::json;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    return json::parse(in);
}

const auto kOpenUnit = CLI::Validator(
    [](std::string& s) -> std::string {
        double v = 0.0;
        try {
            v = std::stod(s);
        } catch (const std::exception&) {
            return "not a number: " + s;
        }
        return v > 0.0 && v < 1.0 ? std::string{} : "value must lie in (0, 1)";
    },
    "(0,1)");

struct Options {
    std::string mdp_path;
    std::string config_path;
    std::optional<double> gamma;
    double tol = 1e-10;
    double demo_gamma = 0.9;
    std::uint64_t seed = 0;
    std::string mode_dynamics;
};

int cmd_validate(const Options& o, std::ostream& out) {
    const MdpDescription desc = load_mdp_description(o.mdp_path);
    const ValidationReport report = validate_mdp(desc);
    out << json(report).dump(2) << '\n';
    return report.ok() ? kExitOk : kExitFailure;
}

int cmd_solve(const Options& o, std::ostream& out) {
    MdpDescription desc = load_mdp_description(o.mdp_path);
    if (o.gamma) desc.gamma = *o.gamma;
    const ValidationReport report = validate_mdp(desc);
    if (!report.ok()) {
        out << json(report).dump(2) << '\n';
        return kExitFailure;
    }
    const FiniteMdp mdp = FiniteMdp::build(std::move(desc));
    const FixedPointResult fp = fixed_point(mdp, kAllDeterministic, o.tol);
    out << json{{"gamma", mdp.gamma()},
                {"tolerance", o.tol},
                {"iterations", fp.iterations},
                {"residual", fp.residual},
                {"q", to_json(fp.q)},
                {"greedy", greedy_actions(mdp, fp.q)}}
               .dump(2)
        << '\n';
    return kExitOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
    const MdpDescription desc = load_mdp_description(o.mdp_path);
    const ValidationReport report = validate_mdp(desc);
    if (!report.ok()) {
        out << json(report).dump(2) << '\n';
        return kExitFailure;
    }
    const FiniteMdp mdp = FiniteMdp::build(desc);
    const json cfg = read_json(o.config_path);
    const auto observed = cfg.at("observed_indices").get<std::vector<std::size_t>>();
    const auto u = cfg.at("I_U").get<std::vector<std::size_t>>();
    const double tol = cfg.value("tolerance", kDefaultIgnorabilityTolerance);
    const auto iterations = cfg.value("iterations", std::size_t{50});
    const auto coords = cfg.value("policy_coordinates", u);

    const PartitionSpec partition = PartitionSpec::with_u(u, mdp.state_dim());
    const ObservationMap obs(observed, mdp.state_dim());
    const PolicyClass policies = measurable_policy_class(mdp, coords);
    const AuditResult result = iterate_and_audit(mdp, partition, obs, policies, iterations, tol);
    out << json(result).dump(2) << '\n';
    return result.passed() ? kExitOk : kExitFailure;
}

int cmd_demo(const Options& o, std::ostream& out) {
    out << json(experiments::run_two_state_demo(o.demo_gamma)).dump(2) << '\n';
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, bool all_arms) {
    experiments::ExperimentConfig config = experiments::load_experiment_config(o.config_path);
    if (all_arms) config.arms.assign(experiments::kAllArms.begin(), experiments::kAllArms.end());
    const auto curve = experiments::run_experiment(config);
    experiments::write_outputs(config, curve);
    json summary{{"output", config.output}, {"rng", Rng::kRngAlgorithm}, {"final_rolling_mean", json::object()}};
    if (config.raw_output) summary["raw_output"] = *config.raw_output;
    for (auto arm : config.arms) summary["final_rolling_mean"][experiments::arm_name(arm)] = curve.final_rolling(arm);
    out << summary.dump(2) << '\n';
    return kExitOk;
}

int cmd_rollout(const Options& o, std::ostream& out) {
    const auto config = read_json(o.config_path).get<grid::GridConfig>();
    Rng rng(o.seed);
    grid::GridState state = grid::reset(config, rng);
    auto line = [&](std::size_t step, std::optional<ActionIndex> action, double reward) {
        json j{{"step", step},
               {"pos", {state.pos.x, state.pos.y}},
               {"mode", state.mode},
               {"signal", state.signal},
               {"belief", state.belief},
               {"reward", reward},
               {"done", state.done}};
        j["action"] = action ? json(*action) : json(nullptr);
        out << j.dump() << '\n';
    };
    line(0, std::nullopt, 0.0);
    while (!state.done) {
        const ActionIndex a = rng.index(grid::kNumActions);
        auto [next, outcome] = grid::step(state, config, a, rng);
        state = next;
        line(state.steps, a, outcome.reward);
    }
    return kExitOk;
}

int cmd_grid_mdp(const Options& o, std::ostream& out) {
    const auto config = read_json(o.config_path).get<grid::GridConfig>();
    grid::MdpOptions options;
    if (o.gamma) options.gamma = *o.gamma;
    if (!o.mode_dynamics.empty()) options.mode_dynamics = grid::parse_mode_dynamics(o.mode_dynamics);
    out << json(grid::as_finite_mdp(config, options).description()).dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Finite-MDP laboratory: Bellman solvers, ignorability audits and gridworld experiments", "rilab"};
    app.require_subcommand(1);
    Options o;

    auto* validate = app.add_subcommand("validate", "Check an MDP JSON file against every invariant");
    validate->add_option("mdp", o.mdp_path, "MDP JSON")->required()->check(CLI::ExistingFile);

    auto* solve = app.add_subcommand("solve", "Solve for Q* by fixed-point iteration");
    solve->add_option("mdp", o.mdp_path, "MDP JSON")->required()->check(CLI::ExistingFile);
    solve->add_option("--gamma", o.gamma, "Override the discount")->check(kOpenUnit);
    solve->add_option("--tol", o.tol, "Sup-norm error bound")->check(CLI::PositiveNumber);

    auto* audit = app.add_subcommand("audit", "Ignorability preconditions and Bellman iterate audit");
    audit->add_option("mdp", o.mdp_path, "MDP JSON")->required()->check(CLI::ExistingFile);
    audit->add_option("config", o.config_path, "Audit JSON")->required()->check(CLI::ExistingFile);

    auto* demo = app.add_subcommand("demo-two-state", "Compare the two policies of the two-state example");
    demo->add_option("--gamma", o.demo_gamma, "Discount")->check(kOpenUnit);

    auto* train = app.add_subcommand("train", "Run the arms listed in an experiment config");
    train->add_option("experiment", o.config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

    auto* figure = app.add_subcommand("reproduce-figure", "Run all four arms and write the aggregate CSV");
    figure->add_option("experiment", o.config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

    auto* rollout = app.add_subcommand("env-rollout", "Print a random-action gridworld episode as JSON lines");
    rollout->add_option("grid", o.config_path, "Grid config JSON")->required()->check(CLI::ExistingFile);
    rollout->add_option("--seed", o.seed, "RNG seed")->required();

    auto* grid_mdp = app.add_subcommand("grid-mdp", "Print the full-state gridworld MDP as JSON");
    grid_mdp->add_option("grid", o.config_path, "Grid config JSON")->required()->check(CLI::ExistingFile);
    grid_mdp->add_option("--gamma", o.gamma, "Discount (default 0.9)")->check(kOpenUnit);
    grid_mdp->add_option("--mode-dynamics", o.mode_dynamics, "persistent or resampled")
        ->check(CLI::IsMember({"persistent", "resampled"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(o, out);
        if (solve->parsed()) return cmd_solve(o, out);
        if (audit->parsed()) return cmd_audit(o, out);
        if (demo->parsed()) return cmd_demo(o, out);
        if (train->parsed()) return cmd_train(o, out, false);
        if (figure->parsed()) return cmd_train(o, out, true);
        if (rollout->parsed()) return cmd_rollout(o, out);
        if (grid_mdp->parsed()) return cmd_grid_mdp(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace rilab::cli
