#pragma once

#include <span>

#include "rilab/mdp.hpp"

// Inner loops of the exact Bellman operators. `serial` is the reference
// implementation; `parallel` distributes the same loops with OpenMP and must
// agree with it to the last bit (every output entry is computed by exactly one
// thread with the same summation order).
namespace rilab::kernels {

namespace serial {

/// out[x] = sum_{a in A_x} pi(a|x) q[(x,a)]
void policy_state_values(const FiniteMdp& mdp, const Policy& policy, std::span<const double> q, std::span<double> out);
/// out[x] = max_{a in A_x} q[(x,a)]
void greedy_state_values(const FiniteMdp& mdp, std::span<const double> q, std::span<double> out);
/// out[p] = sum_y Gamma(y|p) v[y]
void expectation(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out);
/// out[p] = rho[p] + gamma * sum_y Gamma(y|p) v[y]
void backup(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out);
/// max_i |a[i] - b[i]|
double sup_distance(std::span<const double> a, std::span<const double> b);

}  // namespace serial

namespace parallel {

void policy_state_values(const FiniteMdp& mdp, const Policy& policy, std::span<const double> q, std::span<double> out);
void greedy_state_values(const FiniteMdp& mdp, std::span<const double> q, std::span<double> out);
void expectation(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out);
void backup(const FiniteMdp& mdp, std::span<const double> v, std::span<double> out);
double sup_distance(std::span<const double> a, std::span<const double> b);

}  // namespace parallel

}  // namespace rilab::kernels
