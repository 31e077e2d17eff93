#include "rilab/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "rilab/kernels.hpp"

namespace rilab {

namespace {

struct Workspace {
    explicit Workspace(const FiniteMdp& mdp) : state_values(mdp.num_states()), pair_values(mdp.num_pairs()) {}
    std::vector<double> state_values;
    std::vector<double> pair_values;
};

void check_policy(const FiniteMdp& mdp, const Policy& policy) {
    if (auto report = validate_policy(mdp, policy); !report.ok())
        throw std::invalid_argument("invalid policy: " + report.violations.front().message);
}

void check_q(const FiniteMdp& mdp, const QFunction& q) {
    if (!(q.layout() == mdp.layout())) throw std::invalid_argument("Q-function is not defined on this MDP's allowed pairs");
}

void optimality_into(const FiniteMdp& mdp, const OptimizationClass& policies, std::span<const double> q,
                     std::span<double> out, Workspace& ws) {
    if (std::holds_alternative<AllDeterministic>(policies)) {
        kernels::parallel::greedy_state_values(mdp, q, ws.state_values);
        kernels::parallel::backup(mdp, ws.state_values, out);
        return;
    }
    const auto& members = std::get<PolicyClass>(policies).members();
    std::fill(out.begin(), out.end(), -std::numeric_limits<double>::infinity());
    for (const Policy& policy : members) {
        kernels::parallel::policy_state_values(mdp, policy, q, ws.state_values);
        kernels::parallel::expectation(mdp, ws.state_values, ws.pair_values);
        const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t p = 0; p < n; ++p) out[p] = std::max(out[p], ws.pair_values[p]);
    }
    const double gamma = mdp.gamma();
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = mdp.reward(p) + gamma * out[p];
}

void check_class(const FiniteMdp& mdp, const OptimizationClass& policies) {
    if (const auto* cls = std::get_if<PolicyClass>(&policies)) {
        for (const Policy& policy : cls->members()) check_policy(mdp, policy);
    }
}

}  // namespace

double expected_next(const FiniteMdp& mdp, const Policy& policy, const QFunction& g, StateIndex x, ActionIndex a) {
    check_q(mdp, g);
    check_policy(mdp, policy);
    const std::size_t pair = mdp.layout().at(x, a);
    double acc = 0.0;
    for (const auto& t : mdp.transitions(pair)) {
        double inner = 0.0;
        for (std::size_t p = mdp.layout().begin(t.next); p < mdp.layout().end(t.next); ++p)
            inner += policy.prob(t.next, mdp.layout().pair(p).action) * g[p];
        acc += t.prob * inner;
    }
    return acc;
}

QFunction expected_next_all(const FiniteMdp& mdp, const Policy& policy, const QFunction& g) {
    check_q(mdp, g);
    check_policy(mdp, policy);
    Workspace ws(mdp);
    QFunction out(mdp);
    kernels::parallel::policy_state_values(mdp, policy, g.values(), ws.state_values);
    kernels::parallel::expectation(mdp, ws.state_values, out.values());
    return out;
}

QFunction apply_policy_operator(const FiniteMdp& mdp, const Policy& policy, const QFunction& q) {
    check_q(mdp, q);
    check_policy(mdp, policy);
    Workspace ws(mdp);
    QFunction out(mdp);
    kernels::parallel::policy_state_values(mdp, policy, q.values(), ws.state_values);
    kernels::parallel::backup(mdp, ws.state_values, out.values());
    return out;
}

QFunction apply_optimality_operator(const FiniteMdp& mdp, const OptimizationClass& policies, const QFunction& q) {
    check_q(mdp, q);
    check_class(mdp, policies);
    Workspace ws(mdp);
    QFunction out(mdp);
    optimality_into(mdp, policies, q.values(), out.values(), ws);
    return out;
}

ConvergenceError::ConvergenceError(std::size_t iterations, double residual)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "fixed-point iteration did not converge within " << iterations << " iterations (residual " << residual << ")";
          return msg.str();
      }()),
      iterations_(iterations),
      residual_(residual) {}

FixedPointResult fixed_point(const FiniteMdp& mdp, const OptimizationClass& policies, double tolerance,
                             std::size_t max_iterations) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("fixed_point: tolerance must be positive");
    check_class(mdp, policies);
    const double gamma = mdp.gamma();
    const double stop = tolerance * (1.0 - gamma) / gamma;

    Workspace ws(mdp);
    QFunction q(mdp);
    std::vector<double> next(mdp.num_pairs());
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    while (iterations < max_iterations) {
        optimality_into(mdp, policies, q.values(), next, ws);
        residual = kernels::parallel::sup_distance(next, q.values());
        std::copy(next.begin(), next.end(), q.values().begin());
        ++iterations;
        if (residual <= stop) return {std::move(q), iterations, residual};
    }
    throw ConvergenceError(iterations, residual);
}

QFunction evaluate_policy(const FiniteMdp& mdp, const Policy& policy) {
    check_policy(mdp, policy);
    const auto& layout = mdp.layout();
    const auto n = static_cast<Eigen::Index>(layout.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (std::size_t p = 0; p < layout.size(); ++p) {
        rhs(static_cast<Eigen::Index>(p)) = mdp.reward(p);
        for (const auto& t : mdp.transitions(p)) {
            for (std::size_t q = layout.begin(t.next); q < layout.end(t.next); ++q) {
                const double w = policy.prob(t.next, layout.pair(q).action);
                if (w > 0.0) system(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) -= mdp.gamma() * t.prob * w;
            }
        }
    }
    const Eigen::VectorXd solution = system.partialPivLu().solve(rhs);
    return QFunction(mdp.shared_layout(), std::vector<double>(solution.data(), solution.data() + solution.size()));
}

// ------------------------------------------------------------ damped rule

LearningSchedule::LearningSchedule(std::function<double(std::size_t)> alpha, std::string descriptor, bool robbins_monro)
    : alpha_(std::move(alpha)), descriptor_(std::move(descriptor)), robbins_monro_(robbins_monro) {}

LearningSchedule LearningSchedule::harmonic() {
    return LearningSchedule([](std::size_t n) { return 1.0 / static_cast<double>(n); }, "harmonic", true);
}

LearningSchedule LearningSchedule::polynomial(double exponent) {
    if (!(exponent > 0.0 && exponent <= 1.0))
        throw std::invalid_argument("LearningSchedule::polynomial: exponent must lie in (0, 1]");
    // Square-summable only for exponents above one half.
    const bool rm = exponent > 0.5;
    return LearningSchedule([exponent](std::size_t n) { return std::pow(static_cast<double>(n), -exponent); },
                            "polynomial(" + std::to_string(exponent) + ")", rm);
}

LearningSchedule LearningSchedule::constant(double value) {
    if (!(value > 0.0 && value <= 1.0)) throw std::invalid_argument("LearningSchedule::constant: value must lie in (0, 1]");
    return LearningSchedule([value](std::size_t) { return value; }, "constant(" + std::to_string(value) + ")", false);
}

double LearningSchedule::operator()(std::size_t n) const {
    if (n == 0) throw std::domain_error("learning schedule is indexed from n = 1");
    const double a = alpha_(n);
    if (!(a > 0.0 && a <= 1.0)) throw std::domain_error("learning rate " + std::to_string(a) + " outside (0, 1] at n = " + std::to_string(n));
    return a;
}

bool DampedIterationResult::within_first_envelope(double abs_slack) const {
    for (std::size_t n = 1; n < errors.size(); ++n)
        if (errors[n] > envelope_from_first[n] + abs_slack) return false;
    return true;
}

bool DampedIterationResult::within_zero_envelope(double abs_slack) const {
    for (std::size_t n = 0; n < errors.size(); ++n)
        if (errors[n] > envelope_from_zero[n] + abs_slack) return false;
    return true;
}

DampedIterationResult damped_iteration(const FiniteMdp& mdp, const OptimizationClass& policies,
                                       const LearningSchedule& schedule, std::size_t steps) {
    check_class(mdp, policies);
    QFunction q_star = fixed_point(mdp, policies, 1e-12).q;
    const double gamma = mdp.gamma();

    Workspace ws(mdp);
    QFunction q(mdp);
    std::vector<double> image(mdp.num_pairs());
    std::vector<double> errors{sup_distance(q, q_star)};
    std::vector<double> sums{0.0};
    errors.reserve(steps + 1);
    sums.reserve(steps + 1);
    for (std::size_t n = 1; n <= steps; ++n) {
        const double alpha = schedule(n);
        optimality_into(mdp, policies, q.values(), image, ws);
        auto values = q.values();
        for (std::size_t p = 0; p < values.size(); ++p) values[p] = (1.0 - alpha) * values[p] + alpha * image[p];
        errors.push_back(sup_distance(q, q_star));
        sums.push_back(sums.back() + alpha);
    }

    std::vector<double> from_first(steps + 1, 0.0), from_zero(steps + 1, 0.0);
    for (std::size_t n = 0; n <= steps; ++n) {
        from_zero[n] = std::exp(-(1.0 - gamma) * sums[n]) * errors[0];
        if (n >= 1) from_first[n] = std::exp(-(1.0 - gamma) * sums[n - 1]) * errors[1];
    }
    return {std::move(q), std::move(q_star), std::move(errors), std::move(sums), std::move(from_first), std::move(from_zero)};
}

// ------------------------------------------------------------ sampled learner

double EpsilonSchedule::at(std::size_t episode) const {
    return std::max(floor, start * std::pow(decay, static_cast<double>(episode)));
}

namespace {

std::size_t greedy_pair(const PairLayout& layout, std::span<const double> q, StateIndex x) {
    std::size_t best = layout.begin(x);
    for (std::size_t p = layout.begin(x) + 1; p < layout.end(x); ++p)
        if (q[p] > q[best]) best = p;
    return best;
}

}  // namespace

QFunction tabular_q_learning(const FiniteMdp& mdp, const LearningSchedule& schedule, const TabularOptions& options,
                             Rng& rng) {
    const auto& layout = mdp.layout();
    QFunction q(mdp);
    std::vector<std::size_t> visits(mdp.num_pairs(), 0);
    const double gamma = mdp.gamma();

    for (std::size_t episode = 0; episode < options.episodes; ++episode) {
        const double epsilon = options.epsilon.at(episode);
        StateIndex x = rng.categorical(mdp.initial());
        for (std::size_t step = 0; step < options.max_steps; ++step) {
            std::size_t pair;
            if (rng.uniform() < epsilon) {
                pair = layout.begin(x) + rng.index(layout.end(x) - layout.begin(x));
            } else {
                pair = greedy_pair(layout, q.values(), x);
            }
            const auto row = mdp.transitions(pair);
            std::size_t k = 0;
            {
                const double u = rng.uniform();
                double acc = 0.0;
                k = row.size() - 1;
                for (std::size_t i = 0; i < row.size(); ++i) {
                    acc += row[i].prob;
                    if (u < acc) {
                        k = i;
                        break;
                    }
                }
            }
            const StateIndex next = row[k].next;
            const double target = mdp.reward(pair) + gamma * q[greedy_pair(layout, q.values(), next)];
            const double alpha = schedule(++visits[pair]);
            q[pair] = (1.0 - alpha) * q[pair] + alpha * target;

            if (options.stop_at_absorbing && mdp.is_absorbing(x)) break;
            x = next;
        }
    }
    return q;
}

std::vector<ActionIndex> greedy_actions(const FiniteMdp& mdp, const QFunction& q) {
    check_q(mdp, q);
    std::vector<ActionIndex> choice(mdp.num_states());
    for (StateIndex x = 0; x < mdp.num_states(); ++x) choice[x] = mdp.layout().pair(greedy_pair(mdp.layout(), q.values(), x)).action;
    return choice;
}

Policy greedy_policy(const FiniteMdp& mdp, const QFunction& q) {
    const auto choice = greedy_actions(mdp, q);
    return Policy::deterministic(mdp, choice);
}

}  // namespace rilab
