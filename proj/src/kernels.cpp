#include "rilab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <omp.h>

namespace rilab::kernels {

namespace {

void check_sizes(std::size_t got, std::size_t want, const char* what) {
    if (got != want) throw std::invalid_argument(std::string("kernels: size mismatch for ") + what);
}

inline double policy_value_at(const FiniteMdp& mdp, const Policy& policy, std::span<const double> q, StateIndex x) {
    const auto& layout = mdp.layout();
    double acc = 0.0;
    for (std::size_t p = layout.begin(x); p < layout.end(x); ++p) acc += policy.prob(x, layout.pair(p).action) * q[p];
    return acc;
}

inline double greedy_value_at(const FiniteMdp& mdp, std::span<const double> q, StateIndex x) {
    const auto& layout = mdp.layout();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t p = layout.begin(x); p < layout.end(x); ++p) best = std::max(best, q[p]);
    return best;
}

inline double row_expectation(std::span<const std::size_t> offsets, std::span<const Transition> transitions,
                              std::span<const double> v, std::size_t p) {
    double acc = 0.0;
    for (std::size_t k = offsets[p]; k < offsets[p + 1]; ++k) acc += transitions[k].prob * v[transitions[k].next];
    return acc;
}

}  // namespace

namespace serial {

void policy_state_values(const FiniteMdp& mdp, const Policy& policy, std::span<const double> q, std::span<double> out) {
    check_sizes(q.size(), mdp.num_pairs(), "q");
    check_sizes(out.size(), mdp.num_states(), "out");
    for (StateIndex x = 0; x < mdp.num_states(); ++x) out[x] = policy_value_at(mdp, policy, q, x);
}

void greedy_state_values(const FiniteMdp& mdp, std::span<const double> q, std::span<double> out) {
    check_sizes(q.size(), mdp.num_pairs(), "q");
    check_sizes(out.size(), mdp.num_states(), "out");
    for (StateIndex x = 0; x < mdp.num_states(); ++x) out[x] = greedy_value_at(mdp, q, x);
}

void expectation(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out) {
    check_sizes(v.size(), mdp.num_states(), "v");
    check_sizes(out.size(), mdp.num_pairs(), "out");
    const auto offsets = mdp.row_offsets();
    const auto transitions = mdp.all_transitions();
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = row_expectation(offsets, transitions, v, p);
}

void backup(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out) {
    check_sizes(v.size(), mdp.num_states(), "v");
    check_sizes(out.size(), mdp.num_pairs(), "out");
    const auto offsets = mdp.row_offsets();
    const auto transitions = mdp.all_transitions();
    const double gamma = mdp.gamma();
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = mdp.reward(p) + gamma * row_expectation(offsets, transitions, v, p);
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    check_sizes(a.size(), b.size(), "sup_distance");
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
    return best;
}

}  // namespace serial

namespace parallel {

void policy_state_values(const FiniteMdp& mdp, const Policy& policy, std::span<const double> q, std::span<double> out) {
    check_sizes(q.size(), mdp.num_pairs(), "q");
    check_sizes(out.size(), mdp.num_states(), "out");
    const auto n = static_cast<std::ptrdiff_t>(mdp.num_states());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t x = 0; x < n; ++x) out[x] = policy_value_at(mdp, policy, q, static_cast<StateIndex>(x));
}

void greedy_state_values(const FiniteMdp& mdp, std::span<const double> q, std::span<double> out) {
    check_sizes(q.size(), mdp.num_pairs(), "q");
    check_sizes(out.size(), mdp.num_states(), "out");
    const auto n = static_cast<std::ptrdiff_t>(mdp.num_states());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t x = 0; x < n; ++x) out[x] = greedy_value_at(mdp, q, static_cast<StateIndex>(x));
}

void expectation(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out) {
    check_sizes(v.size(), mdp.num_states(), "v");
    check_sizes(out.size(), mdp.num_pairs(), "out");
    const auto offsets = mdp.row_offsets();
    const auto transitions = mdp.all_transitions();
    const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) out[p] = row_expectation(offsets, transitions, v, static_cast<std::size_t>(p));
}

void backup(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out) {
    check_sizes(v.size(), mdp.num_states(), "v");
    check_sizes(out.size(), mdp.num_pairs(), "out");
    const auto offsets = mdp.row_offsets();
    const auto transitions = mdp.all_transitions();
    const double gamma = mdp.gamma();
    const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const auto pair = static_cast<std::size_t>(p);
        out[pair] = mdp.reward(pair) + gamma * row_expectation(offsets, transitions, v, pair);
    }
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    check_sizes(a.size(), b.size(), "sup_distance");
    double best = 0.0;
    const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static) reduction(max : best)
    for (std::ptrdiff_t i = 0; i < n; ++i) best = std::max(best, std::abs(a[i] - b[i]));
    return best;
}

}  // namespace parallel

}  // namespace rilab::kernels
