#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rilab/mdp.hpp"
#include "rilab/qfunction.hpp"
#include "rilab/rng.hpp"

namespace rilab {

/// The implicit class of every deterministic stationary policy; the supremum
/// over it is the usual pointwise max over allowable actions.
struct AllDeterministic {};
inline constexpr AllDeterministic kAllDeterministic{};

/// Class the optimality operator maximizes over.
using OptimizationClass = std::variant<AllDeterministic, PolicyClass>;

inline constexpr std::size_t kDefaultIterationCap = 1'000'000;

/// E[g(X_{j+1}, A_{j+1}) | X_j = x, A_j = a] under `policy`. Throws
/// std::out_of_range when (x, a) is not an allowed pair.
double expected_next(const FiniteMdp& mdp, const Policy& policy, const QFunction& g, StateIndex x, ActionIndex a);

/// expected_next evaluated at every allowed pair.
QFunction expected_next_all(const FiniteMdp& mdp, const Policy& policy, const QFunction& g);

QFunction apply_policy_operator(const FiniteMdp& mdp, const Policy& policy, const QFunction& q);
QFunction apply_optimality_operator(const FiniteMdp& mdp, const OptimizationClass& policies, const QFunction& q);

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::size_t iterations, double residual);
    std::size_t iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    std::size_t iterations_;
    double residual_;
};

struct FixedPointResult {
    QFunction q;
    std::size_t iterations = 0;
    /// Last step size ||Q_{n+1} - Q_n||.
    double residual = 0.0;
};

// Iterates Q <- T* Q from zero until the step size drops below
// tolerance * (1 - gamma) / gamma, which bounds the error to Q* by `tolerance`.
FixedPointResult fixed_point(const FiniteMdp& mdp, const OptimizationClass& policies, double tolerance,
                             std::size_t max_iterations = kDefaultIterationCap);

/// Exact q^pi from the linear system (I - gamma P_pi) q = rho over Y.
QFunction evaluate_policy(const FiniteMdp& mdp, const Policy& policy);

/// Step-size sequence alpha_n, n >= 1.
class LearningSchedule {
public:
    LearningSchedule(std::function<double(std::size_t)> alpha, std::string descriptor, bool robbins_monro);

    static LearningSchedule harmonic();                  // 1/n
    static LearningSchedule polynomial(double exponent); // n^-exponent
    static LearningSchedule constant(double value);      // not Robbins-Monro

    /// Throws std::domain_error if n == 0 or the value leaves (0, 1].
    double operator()(std::size_t n) const;
    const std::string& descriptor() const { return descriptor_; }
    bool satisfies_robbins_monro() const { return robbins_monro_; }

private:
    std::function<double(std::size_t)> alpha_;
    std::string descriptor_;
    bool robbins_monro_;
};

struct DampedIterationResult {
    QFunction q;
    QFunction q_star;
    /// errors[n] = ||Q^n - Q*||, n = 0..steps.
    std::vector<double> errors;
    /// alpha_sums[m] = sum_{n=1}^m alpha_n, m = 0..steps.
    std::vector<double> alpha_sums;
    /// envelope_from_first[n] = exp(-(1-gamma) alpha_sums[n-1]) ||Q^1 - Q*|| for n >= 1 (entry 0 unused).
    std::vector<double> envelope_from_first;
    /// envelope_from_zero[n] = exp(-(1-gamma) alpha_sums[n]) ||Q^0 - Q*||.
    std::vector<double> envelope_from_zero;

    /// errors[n] <= envelope[n] + abs_slack at every step n >= 1.
    bool within_first_envelope(double abs_slack = 1e-12) const;
    bool within_zero_envelope(double abs_slack = 1e-12) const;
};

/// Q^n = (1 - alpha_n) Q^{n-1} + alpha_n T* Q^{n-1} from Q^0 = 0, with the
/// error trace against Q* (solved to 1e-12).
DampedIterationResult damped_iteration(const FiniteMdp& mdp, const OptimizationClass& policies,
                                       const LearningSchedule& schedule, std::size_t steps);

struct EpsilonSchedule {
    double start = 1.0;
    double decay = 1.0;
    double floor = 0.0;

    /// max(floor, start * decay^episode), episode counted from zero.
    double at(std::size_t episode) const;
};

struct TabularOptions {
    std::size_t episodes = 1000;
    std::size_t max_steps = 100;
    EpsilonSchedule epsilon{0.5, 1.0, 0.5};
    /// End an episode after the first update taken in an absorbing state.
    bool stop_at_absorbing = true;
};

/// Sampled Watkins Q-learning with epsilon-greedy behavior; the step size of
/// each update is schedule(visit count of that pair).
QFunction tabular_q_learning(const FiniteMdp& mdp, const LearningSchedule& schedule, const TabularOptions& options,
                             Rng& rng);

/// Lowest-index maximizer over A_x at every state.
std::vector<ActionIndex> greedy_actions(const FiniteMdp& mdp, const QFunction& q);
Policy greedy_policy(const FiniteMdp& mdp, const QFunction& q);

}  // namespace rilab
