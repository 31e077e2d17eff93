#include "fixtures.hpp"

#include <algorithm>
#include <numeric>

namespace rilab::fixtures {

MdpDescription two_state_description(double gamma) {
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
    return d;
}

Policy two_state_policy(bool prefer_one) {
    const double p1 = prefer_one ? 0.8 : 0.2;
    return Policy({{1.0 - p1, p1, 0.0}, {0.0, 0.0, 1.0}});
}

FiniteMdp random_mdp(Rng& rng, const RandomMdpShape& shape) {
    const std::size_t n = shape.states;
    MdpDescription d;
    for (std::size_t x = 0; x < n; ++x) d.states.push_back({static_cast<double>(x)});
    for (std::size_t a = 0; a < shape.actions; ++a) d.actions.push_back({static_cast<double>(a)});
    d.gamma = shape.gamma;

    std::vector<ActionIndex> all(shape.actions);
    std::iota(all.begin(), all.end(), ActionIndex{0});
    for (std::size_t x = 0; x < n; ++x) {
        std::vector<ActionIndex> allowed;
        for (ActionIndex a : all)
            if (rng.bernoulli(0.7)) allowed.push_back(a);
        if (allowed.empty()) allowed.push_back(all[rng.index(all.size())]);
        d.allowable.push_back(allowed);
    }

    std::vector<StateIndex> order(n);
    std::iota(order.begin(), order.end(), StateIndex{0});
    const std::size_t support = std::min(shape.support, n);
    std::size_t next_forced = 0;
    for (std::size_t x = 0; x < n; ++x) {
        for (ActionIndex a : d.allowable[x]) {
            std::shuffle(order.begin(), order.end(), rng.engine());
            std::vector<StateIndex> succ(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(support));
            // every state has a pair, so walking the states through the rows reaches them all
            if (next_forced < n && std::find(succ.begin(), succ.end(), next_forced) == succ.end()) succ[0] = next_forced;
            ++next_forced;
            std::vector<double> row(n, 0.0);
            double total = 0.0;
            for (StateIndex y : succ) {
                const double w = 0.05 + rng.uniform();
                row[y] += w;
                total += w;
            }
            for (double& p : row) p /= total;
            d.kernel[{x, a}] = std::move(row);
            d.reward[{x, a}] = -5.0 + 10.0 * rng.uniform();
        }
    }
    std::vector<double> mu(n);
    for (double& m : mu) m = 0.1 + rng.uniform();
    const double s = std::accumulate(mu.begin(), mu.end(), 0.0);
    for (double& m : mu) m /= s;
    d.initial = std::move(mu);
    return FiniteMdp::build(std::move(d));
}

QFunction random_q(const FiniteMdp& mdp, Rng& rng, double scale) {
    QFunction q(mdp);
    for (double& v : q.values()) v = -scale + 2.0 * scale * rng.uniform();
    return q;
}

Policy random_policy(const FiniteMdp& mdp, Rng& rng) {
    Policy policy(mdp.num_states(), mdp.num_actions());
    for (StateIndex x = 0; x < mdp.num_states(); ++x) {
        const auto allowed = mdp.layout().allowed(x);
        std::vector<double> w(allowed.size());
        double total = 0.0;
        for (double& v : w) total += (v = 0.05 + rng.uniform());
        for (std::size_t i = 0; i < allowed.size(); ++i) policy.set(x, allowed[i], w[i] / total);
    }
    return policy;
}

namespace {

std::vector<double> positive_distribution(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (double& v : p) total += (v = 0.1 + rng.uniform());
    for (double& v : p) v /= total;
    return p;
}

}  // namespace

MdpDescription product_form_description(Rng& rng, std::size_t num_u, std::size_t num_w, std::size_t num_actions,
                                        double gamma) {
    MdpDescription d;
    const std::size_t n = num_u * num_w;
    for (std::size_t u = 0; u < num_u; ++u)
        for (std::size_t w = 0; w < num_w; ++w) d.states.push_back({static_cast<double>(u), static_cast<double>(w)});
    for (std::size_t a = 0; a < num_actions; ++a) d.actions.push_back({static_cast<double>(a)});
    std::vector<ActionIndex> all(num_actions);
    std::iota(all.begin(), all.end(), ActionIndex{0});
    d.allowable.assign(n, all);

    std::vector<std::vector<std::vector<double>>> gamma_u(num_u);
    for (auto& per_action : gamma_u)
        for (std::size_t a = 0; a < num_actions; ++a) per_action.push_back(positive_distribution(rng, num_u));
    for (std::size_t u = 0; u < num_u; ++u) {
        for (std::size_t w = 0; w < num_w; ++w) {
            const StateIndex x = product_state(u, w, num_w);
            for (ActionIndex a = 0; a < num_actions; ++a) {
                const auto gw = positive_distribution(rng, num_w);
                std::vector<double> row(n);
                for (std::size_t u2 = 0; u2 < num_u; ++u2)
                    for (std::size_t w2 = 0; w2 < num_w; ++w2) row[product_state(u2, w2, num_w)] = gamma_u[u][a][u2] * gw[w2];
                d.kernel[{x, a}] = std::move(row);
                d.reward[{x, a}] = rng.uniform();
            }
        }
    }
    d.gamma = gamma;
    d.initial.assign(n, 1.0 / static_cast<double>(n));
    return d;
}

}  // namespace rilab::fixtures
