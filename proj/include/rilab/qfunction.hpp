#pragma once

#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "rilab/mdp.hpp"

namespace rilab {

/// Bounded table on the allowed pairs Y of one MDP.
class QFunction {
public:
    explicit QFunction(const FiniteMdp& mdp, double fill = 0.0);
    QFunction(std::shared_ptr<const PairLayout> layout, std::vector<double> values);

    static QFunction from_rewards(const FiniteMdp& mdp);

    const PairLayout& layout() const { return *layout_; }
    const std::shared_ptr<const PairLayout>& shared_layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }

    double operator()(StateIndex x, ActionIndex a) const { return values_[layout_->at(x, a)]; }
    double& operator()(StateIndex x, ActionIndex a) { return values_[layout_->at(x, a)]; }
    double operator[](std::size_t pair) const { return values_[pair]; }
    double& operator[](std::size_t pair) { return values_[pair]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double sup_norm() const;
    bool all_finite() const;

private:
    std::shared_ptr<const PairLayout> layout_;
    std::vector<double> values_;
};

double sup_distance(const QFunction& a, const QFunction& b);

/// JSON map "x,a" -> number.
nlohmann::json to_json(const QFunction& q);
QFunction qfunction_from_json(const FiniteMdp& mdp, const nlohmann::json& j);

}  // namespace rilab
