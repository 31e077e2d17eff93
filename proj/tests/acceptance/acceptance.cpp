// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "rilab/agents.hpp"
#include "rilab/bellman.hpp"
#include "rilab/experiments.hpp"
#include "rilab/gridworld.hpp"
#include "rilab/ignorability.hpp"
#include "rilab/mlp.hpp"

using namespace rilab;

namespace {

const std::string kData = std::string(RILAB_SOURCE_DIR) + "/data/";

// tolerances
constexpr double kContractionSlack = 1e-12;
constexpr double kTwoStateTol = 1e-8;
constexpr double kEnvelopeSlack = 1e-12;
constexpr double kAuditTol = 1e-9;
constexpr double kProductTol = 1e-12;
constexpr double kPerturbation = 1e-6;
constexpr double kWitnessOracleTol = 1e-15;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kTabularSup = 0.05;
// "expected return <= 0" is checked against the exact evaluation with this slack
constexpr double kZeroReturnSlack = 1e-9;

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_s;  // <= 0: reported only
    std::function<Outcome()> run;
};

std::string fmt(double v, int prec = 6) {
    std::ostringstream s;
    s << std::setprecision(prec) << v;
    return s.str();
}

Outcome contraction() {
    Rng rng(101);
    double worst_excess = -1e300;
    std::size_t mdps = 0, pairs = 0;
    for (; mdps < 120; ++mdps) {
        const std::size_t n = 1 + rng.index(20), m = 1 + rng.index(5);
        const double gamma = 0.05 + 0.9 * rng.uniform();
        const auto mdp = fixtures::random_mdp(rng, {n, m, 1 + rng.index(n), gamma});
        const auto pi = fixtures::random_policy(mdp, rng);
        for (int k = 0; k < 100; ++k, ++pairs) {
            const auto q1 = fixtures::random_q(mdp, rng), q2 = fixtures::random_q(mdp, rng);
            const double dist = sup_distance(q1, q2);
            for (int op = 0; op < 2; ++op) {
                const auto t1 = op == 0 ? apply_policy_operator(mdp, pi, q1) : apply_optimality_operator(mdp, kAllDeterministic, q1);
                const auto t2 = op == 0 ? apply_policy_operator(mdp, pi, q2) : apply_optimality_operator(mdp, kAllDeterministic, q2);
                worst_excess = std::max(worst_excess, sup_distance(t1, t2) - gamma * dist);
            }
        }
    }
    return {worst_excess <= kContractionSlack,
            std::to_string(mdps) + " MDPs, " + std::to_string(pairs) + " pairs, max(||TQ1-TQ2|| - g||Q1-Q2||) = " +
                fmt(worst_excess)};
}

Outcome two_state_fixed_point() {
    std::ostringstream out, err;
    const int code = cli::run({"solve", kData + "two_state.json", "--gamma", "0.9", "--tol", "1e-12"}, out, err);
    if (code != cli::kExitOk) return {false, "solve exited " + std::to_string(code) + ": " + err.str()};
    const auto q = nlohmann::json::parse(out.str()).at("q");

    // closed form under the optimal action 1 at state 0
    const double q01 = 2.0 / 0.91;
    const double q00 = 1.0 + 0.54 * q01;
    // linear solve of the Bellman equation for V0 with action 1: V0 = 2 + 0.9 (0.1 V0 + 0.9 * 0)
    const double v0 = 2.0 / (1.0 - 0.9 * 0.1);
    const double err01 = std::max(std::abs(q.at("0,1").get<double>() - q01), std::abs(q01 - v0));
    const double err00 = std::abs(q.at("0,0").get<double>() - q00);
    const double err12 = std::abs(q.at("1,2").get<double>());
    const double worst = std::max({err01, err00, err12});
    return {worst <= kTwoStateTol, "Q*(0,0), Q*(0,1), Q*(1,2) max error " + fmt(worst)};
}

Outcome envelope() {
    const auto mdp = FiniteMdp::build(fixtures::two_state_description(0.9));
    const std::size_t steps = 10000;
    const auto r = damped_iteration(mdp, kAllDeterministic, LearningSchedule::harmonic(), steps);
    double worst = -1e300;
    for (std::size_t n = 1; n <= steps; ++n) worst = std::max(worst, r.errors[n] - r.envelope_from_first[n]);
    const bool final_below = r.errors[steps] < r.envelope_from_first[steps];
    return {worst <= kEnvelopeSlack && final_below,
            std::to_string(steps) + " steps, max(error - envelope) = " + fmt(worst) + ", final error " +
                fmt(r.errors[steps]) + " < envelope " + fmt(r.envelope_from_first[steps])};
}

Outcome preservation_audit() {
    const std::vector<std::size_t> pos{0, 1};
    const auto ri = grid::as_finite_mdp(grid::GridConfig{});
    const auto ri_result = iterate_and_audit(ri, PartitionSpec::with_u(pos, 3), ObservationMap(pos, 3),
                                             grid::shipped_policies(ri), 50, kAuditTol);
    const auto passing = std::count_if(ri_result.iterates.begin(), ri_result.iterates.end(),
                                       [](const IgnorabilityReport& r) { return r.passed(); });
    grid::GridConfig nc;
    nc.variant = grid::Variant::non_ignorable;
    const auto non_ri = grid::as_finite_mdp(nc);
    const auto nr = iterate_and_audit(non_ri, PartitionSpec::with_u(pos, 3), ObservationMap(pos, 3),
                                      grid::shipped_policies(non_ri), 50, kAuditTol);
    const bool a2_failed = nr.failed_assumptions == std::vector<Assumption>{Assumption::reward_relative_ignorability};
    const bool witness = nr.preconditions.size() == 3 && !nr.preconditions[1].witnesses.empty();
    std::string detail = "RI: " + std::to_string(passing) + "/" + std::to_string(ri_result.iterates.size()) +
                         " iterates pass; non-RI: A2 " + (a2_failed ? "fails" : "does not fail");
    if (witness) {
        const auto& w = nr.preconditions[1].witnesses.front();
        detail += ", witness states " + std::to_string(w.state) + "/" + std::to_string(w.other_state.value_or(w.state)) +
                  " action " + std::to_string(w.action.value_or(0)) + " magnitude " + fmt(w.magnitude);
    }
    return {ri_result.failed_assumptions.empty() && ri_result.iterates.size() == 50 && passing == 50 && a2_failed &&
                witness && nr.iterates.empty(),
            detail};
}

Outcome checker_soundness() {
    Rng rng(4242);
    int clean_pass = 0, caught = 0;
    const int constructions = 50;
    for (int trial = 0; trial < constructions; ++trial) {
        const std::size_t nu = 2 + rng.index(3), nw = 2 + rng.index(3), na = 1 + rng.index(3);
        auto d = fixtures::product_form_description(rng, nu, nw, na);
        const PartitionSpec partition = PartitionSpec::with_u({0}, 2);
        const ObservationMap obs({0}, 2);
        {
            const auto mdp = FiniteMdp::build(d);
            if (check_partial_ignorability(mdp, partition, obs, PolicyClass({Policy::uniform(mdp)}), kProductTol).passed())
                ++clean_pass;
        }
        const StateIndex x = rng.index(nu * nw);
        const ActionIndex a = rng.index(na);
        auto& row = d.kernel[{x, a}];
        row[rng.index(nu * nw)] += kPerturbation;
        for (double& p : row) p /= 1.0 + kPerturbation;
        double oracle = 0.0;
        for (std::size_t u = 0; u < nu; ++u)
            for (std::size_t w = 0; w < nw; ++w) {
                double mu = 0.0, mw = 0.0;
                for (std::size_t k = 0; k < nw; ++k) mu += row[fixtures::product_state(u, k, nw)];
                for (std::size_t k = 0; k < nu; ++k) mw += row[fixtures::product_state(k, w, nw)];
                oracle = std::max(oracle, std::abs(row[fixtures::product_state(u, w, nw)] - mu * mw));
            }
        const auto mdp = FiniteMdp::build(d);
        const auto report = check_partial_ignorability(mdp, partition, obs, PolicyClass({Policy::uniform(mdp)}), kProductTol);
        const auto hit = std::find_if(report.witnesses.begin(), report.witnesses.end(),
                                      [](const Witness& w) { return w.condition == "factorization"; });
        if (!report.passed() && hit != report.witnesses.end() && hit->state == x && hit->action == a &&
            std::abs(hit->magnitude - oracle) <= kWitnessOracleTol)
            ++caught;
    }
    return {clean_pass == constructions && caught == constructions,
            std::to_string(clean_pass) + "/" + std::to_string(constructions) + " product kernels pass, " +
                std::to_string(caught) + "/" + std::to_string(constructions) + " perturbations caught at the right pair"};
}

Outcome gradient_check() {
    Rng rng(777);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t in = 2 + rng.index(3), out = 1 + rng.index(4);
        auto net = nn::Mlp::glorot({in, 8 + rng.index(24), 8 + rng.index(24), out}, rng);
        for (auto& L : net.layers())
            for (double& b : L.biases) b = rng.normal(0.0, 0.3);
        std::vector<double> x(in), gy(out);
        for (double& v : x) v = rng.normal(0.0, 1.0);
        for (double& v : gy) v = rng.normal(0.0, 1.0);
        const auto analytic = nn::flatten(net.backward(x, gy));
        auto params = net.flat_parameters();
        auto objective = [&] {
            const auto y = net.forward(x);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * gy[i];
            return s;
        };
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + kFdStep;
            net.set_flat_parameters(params);
            const double up = objective();
            params[i] = keep - kFdStep;
            net.set_flat_parameters(params);
            const double down = objective();
            params[i] = keep;
            net.set_flat_parameters(params);
            const double fd = (up - down) / (2.0 * kFdStep);
            // relative to the larger magnitude; exactly-zero pairs (dead units) count as agreement
            const double scale = std::max(std::abs(fd), std::abs(analytic[i]));
            if (scale > 0.0) worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
        }
    }
    return {worst < kFdRelTol, "10 networks, max relative error " + fmt(worst)};
}

struct Gridworld {
    experiments::RewardCurve curve;
    double seconds = 0.0;
};

const Gridworld& gridworld_run() {
    static const Gridworld result = [] {
        const auto t0 = std::chrono::steady_clock::now();
        Gridworld g;
        g.curve = experiments::run_experiment(experiments::ExperimentConfig{});
        g.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return g;
    }();
    return result;
}

double final_of(experiments::Arm arm) { return gridworld_run().curve.final_rolling(arm); }

Outcome gridworld_a() {
    const double v = final_of(experiments::Arm::vanilla_ri);
    return {v >= 8.3 && v <= 9.3, "vanilla-RI final rolling mean " + fmt(v) + " in [8.3, 9.3] (" +
                                      fmt(gridworld_run().seconds, 3) + " s for the 4-arm protocol)"};
}

Outcome gridworld_b() {
    const double v = final_of(experiments::Arm::vanilla_non_ri);
    return {v <= 2.0, "vanilla-nonRI final rolling mean " + fmt(v) + " <= 2.0"};
}

Outcome gridworld_c() {
    const double v = final_of(experiments::Arm::pomdp_non_ri);
    return {v >= 7.5, "pomdp-nonRI final rolling mean " + fmt(v) + " >= 7.5"};
}

Outcome gridworld_d() {
    using experiments::Arm;
    const double pn = final_of(Arm::pomdp_non_ri), vn = final_of(Arm::vanilla_non_ri);
    const double vr = final_of(Arm::vanilla_ri), pr = final_of(Arm::pomdp_ri);
    return {pn > vn && vr >= pr - 0.5, "pomdp-nonRI " + fmt(pn) + " > vanilla-nonRI " + fmt(vn) + "; vanilla-RI " +
                                           fmt(vr) + " >= pomdp-RI " + fmt(pr) + " - 0.5"};
}

Outcome gridworld_d_speed() {
    using experiments::Arm;
    const auto& c = gridworld_run().curve;
    const auto v = c.sustained_from(Arm::vanilla_ri, 8.0), p = c.sustained_from(Arm::pomdp_ri, 8.0);
    auto show = [](std::optional<std::size_t> e) { return e ? std::to_string(*e) : std::string("never"); };
    const bool holds = v && (!p || *v <= *p + 100);
    return {holds, "first episode sustaining rolling mean >= 8: vanilla-RI " + show(v) + ", pomdp-RI " + show(p) +
                       (holds ? " (vanilla within 100)" : " (vanilla slower by more than 100)")};
}

std::vector<bool> terminal_mask(const FiniteMdp& mdp) {
    std::vector<bool> mask(mdp.num_states());
    for (StateIndex x = 0; x < mdp.num_states(); ++x) mask[x] = grid::is_terminal({int(mdp.state(x)[0]), int(mdp.state(x)[1])});
    return mask;
}

agents::ObservationLearnerOptions tabular_options(const FiniteMdp& mdp) {
    agents::ObservationLearnerOptions o;
    o.tabular.episodes = 400000;
    o.tabular.max_steps = 100;
    o.tabular.epsilon = {0.5, 1.0, 0.5};
    o.terminal = terminal_mask(mdp);
    return o;
}

Outcome tabular_cross_check() {
    const ObservationMap obs({0, 1}, 3);
    const auto ri = grid::as_finite_mdp(grid::GridConfig{});
    const auto target = agents::project_onto_observations(ri, obs, fixed_point(ri, kAllDeterministic, 1e-12).q);
    Rng rng(2024);
    const auto learned = agents::observation_q_learning(ri, obs, LearningSchedule::polynomial(0.8), tabular_options(ri), rng);
    const double dist = agents::sup_distance(learned, target);

    grid::GridConfig nc;
    nc.variant = grid::Variant::non_ignorable;
    const auto non_ri = grid::as_finite_mdp(nc);
    Rng rng2(2025);
    const auto table = agents::observation_q_learning(non_ri, obs, LearningSchedule::polynomial(0.8), tabular_options(non_ri), rng2);
    std::vector<ActionIndex> choice(non_ri.num_states());
    for (StateIndex x = 0; x < non_ri.num_states(); ++x) {
        const auto& row = table.values[table.class_of[x]];
        choice[x] = static_cast<ActionIndex>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    const auto q = evaluate_policy(non_ri, Policy::deterministic(non_ri, choice));
    double start = 0.0;
    for (int m = 0; m < 2; ++m) {
        const auto x = grid::state_index({0, 0}, m);
        start += 0.5 * q(x, choice[x]);
    }
    return {dist <= kTabularSup && start <= kZeroReturnSlack,
            "RI sup distance " + fmt(dist) + " <= 0.05; non-RI greedy return from (0,0) " + fmt(start) + " <= 0"};
}

Outcome selective_degradation_check() {
    const std::vector<AppFunction> functions{{"fraud_detection", {0}}, {"marketing", {0, 1}}, {"purchasing", {}}};
    const auto plan = selective_degradation(functions, {1});
    const bool ok = plan.disabled == std::vector<std::string>{"marketing"} &&
                    plan.enabled == std::vector<std::string>{"fraud_detection", "purchasing"};
    return {ok, "disabled: " + (plan.disabled.empty() ? std::string("none") : plan.disabled.front()) + " (" +
                    std::to_string(plan.disabled.size()) + " total)"};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"contraction", 10.0, contraction},
        {"two-state fixed point", 1.0, two_state_fixed_point},
        {"convergence envelope", 5.0, envelope},
        {"preservation audit", 5.0, preservation_audit},
        {"ignorability checker soundness", 10.0, checker_soundness},
        {"gradient check", 5.0, gradient_check},
        {"gridworld (a) vanilla-RI converges", 0.0, gridworld_a},
        {"gridworld (b) vanilla-nonRI does not converge", 0.0, gridworld_b},
        {"gridworld (c) pomdp-nonRI finds the policy", 0.0, gridworld_c},
        {"gridworld (d) final ordering", 0.0, gridworld_d},
        {"gridworld (d) vanilla-RI speed", 0.0, gridworld_d_speed},
        {"tabular cross-check", 30.0, tabular_cross_check},
        {"selective degradation", 1.0, selective_degradation_check},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.budget_s <= 0.0 || s < c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt(s, 3) << " s";
        if (c.budget_s > 0.0) std::cout << ", budget " << fmt(c.budget_s, 3) << " s" << (in_time ? "" : " EXCEEDED");
        std::cout << "]\n";
    }
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << '\n';
    return failures == 0 ? 0 : 1;
}
