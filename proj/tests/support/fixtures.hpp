#pragma once

#include <cstddef>
#include <vector>

#include "rilab/mdp.hpp"
#include "rilab/qfunction.hpp"
#include "rilab/rng.hpp"

namespace rilab::fixtures {

/// The worked two-state example: A_0 = {0, 1}, A_1 = {2}, state 1 absorbing.
MdpDescription two_state_description(double gamma = 0.9);

/// pi(1|0) = 0.8 (`prefer_one`) or pi(0|0) = 0.8.
Policy two_state_policy(bool prefer_one);

struct RandomMdpShape {
    std::size_t states = 10;
    std::size_t actions = 3;
    /// Nonzero successors per kernel row (clamped to the state count).
    std::size_t support = 3;
    double gamma = 0.9;
};

/// Random valid MDP: every state keeps a nonempty random subset of actions,
/// rows are random sparse distributions, and each state is some row's
/// successor so reachability holds.
FiniteMdp random_mdp(Rng& rng, const RandomMdpShape& shape);

/// Entries uniform in [-scale, scale].
QFunction random_q(const FiniteMdp& mdp, Rng& rng, double scale = 10.0);

/// Random stochastic policy supported on the allowable sets.
Policy random_policy(const FiniteMdp& mdp, Rng& rng);

/// States are the grid (u, w) with u < num_u, w < num_w (coordinates 0 and 1).
/// Every kernel row is Gamma_U(. | u, a) x Gamma_W(. | x, a) with strictly
/// positive factors, every action is allowed everywhere.
MdpDescription product_form_description(Rng& rng, std::size_t num_u, std::size_t num_w, std::size_t num_actions,
                                        double gamma = 0.9);

inline StateIndex product_state(std::size_t u, std::size_t w, std::size_t num_w) { return u * num_w + w; }

}  // namespace rilab::fixtures
