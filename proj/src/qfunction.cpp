#include "rilab/qfunction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rilab/kernels.hpp"

namespace rilab {

QFunction::QFunction(const FiniteMdp& mdp, double fill)
    : layout_(mdp.shared_layout()), values_(mdp.num_pairs(), fill) {}

QFunction::QFunction(std::shared_ptr<const PairLayout> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (!layout_ || layout_->size() != values_.size())
        throw std::invalid_argument("QFunction: value count does not match the allowed pairs");
}

QFunction QFunction::from_rewards(const FiniteMdp& mdp) {
    return QFunction(mdp.shared_layout(), std::vector<double>(mdp.rewards().begin(), mdp.rewards().end()));
}

double QFunction::sup_norm() const {
    double best = 0.0;
    for (double v : values_) best = std::max(best, std::abs(v));
    return best;
}

bool QFunction::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double sup_distance(const QFunction& a, const QFunction& b) {
    if (!(a.layout() == b.layout())) throw std::invalid_argument("sup_distance: Q-functions over different pair sets");
    return kernels::parallel::sup_distance(a.values(), b.values());
}

nlohmann::json to_json(const QFunction& q) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t p = 0; p < q.size(); ++p) {
        const auto [x, a] = q.layout().pair(p);
        j[pair_key(x, a)] = q[p];
    }
    return j;
}

QFunction qfunction_from_json(const FiniteMdp& mdp, const nlohmann::json& j) {
    QFunction q(mdp);
    if (j.size() != q.size()) throw std::invalid_argument("Q-function JSON does not cover exactly the allowed pairs");
    for (const auto& [key, value] : j.items()) {
        const auto sa = parse_pair_key(key);
        q(sa.state, sa.action) = value.get<double>();
    }
    return q;
}

}  // namespace rilab
