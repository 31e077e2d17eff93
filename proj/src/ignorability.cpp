#include "rilab/ignorability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace rilab {

namespace {

std::vector<double> project_onto(std::span<const double> state, std::span<const std::size_t> indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(state[i]);
    return out;
}

// Group id of every state under the projection onto `indices`; ids follow
// first appearance. An empty index list puts every state in group 0.
struct Grouping {
    std::vector<std::size_t> id;
    std::size_t count = 0;
};

Grouping group_by(const FiniteMdp& mdp, std::span<const std::size_t> indices) {
    Grouping g;
    g.id.resize(mdp.num_states());
    std::map<std::vector<double>, std::size_t> seen;
    for (StateIndex x = 0; x < mdp.num_states(); ++x) {
        auto [it, inserted] = seen.try_emplace(project_onto(mdp.state(x), indices), g.count);
        if (inserted) ++g.count;
        g.id[x] = it->second;
    }
    return g;
}

std::vector<std::vector<StateIndex>> classes_of(const Grouping& g) {
    std::vector<std::vector<StateIndex>> classes(g.count);
    for (StateIndex x = 0; x < g.id.size(); ++x) classes[g.id[x]].push_back(x);
    return classes;
}

class WitnessSink {
public:
    explicit WitnessSink(double tol) : tol_(tol) {}

    void offer(Witness w) {
        max_ = std::max(max_, w.magnitude);
        if (w.magnitude > tol_) witnesses_.push_back(std::move(w));
    }
    void absorb(const IgnorabilityReport& report, std::optional<std::size_t> policy) {
        max_ = std::max(max_, report.max_violation);
        for (Witness w : report.witnesses) {
            if (policy) w.policy = policy;
            witnesses_.push_back(std::move(w));
        }
    }

    IgnorabilityReport finish(std::string check, std::string note = {}) && {
        std::stable_sort(witnesses_.begin(), witnesses_.end(),
                         [](const Witness& a, const Witness& b) { return a.magnitude > b.magnitude; });
        if (witnesses_.size() > kMaxWitnesses) witnesses_.resize(kMaxWitnesses);
        IgnorabilityReport report;
        report.check = std::move(check);
        report.max_violation = max_;
        report.tolerance = tol_;
        report.verdict = max_ <= tol_ ? Verdict::pass : Verdict::fail;
        report.witnesses = std::move(witnesses_);
        report.note = std::move(note);
        return report;
    }

private:
    double tol_;
    double max_ = 0.0;
    std::vector<Witness> witnesses_;
};

void check_obs(const FiniteMdp& mdp, const ObservationMap& obs) {
    if (obs.dim() != mdp.state_dim())
        throw std::invalid_argument("observation map built for dimension " + std::to_string(obs.dim()) +
                                    " applied to states of dimension " + std::to_string(mdp.state_dim()));
}

// Gamma_U(. | pair) as a dense vector over U-groups.
std::vector<double> u_marginal(const FiniteMdp& mdp, const Grouping& u_groups, std::size_t pair) {
    std::vector<double> out(u_groups.count, 0.0);
    for (const auto& t : mdp.transitions(pair)) out[u_groups.id[t.next]] += t.prob;
    return out;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::incomparable: return "incomparable";
    }
    return "unknown";
}

std::string to_string(Assumption a) {
    switch (a) {
        case Assumption::partial_ignorability: return "A1";
        case Assumption::reward_relative_ignorability: return "A2";
        case Assumption::observation_within_u: return "A3";
    }
    return "unknown";
}

// ------------------------------------------------------------ maps and specs

ObservationMap::ObservationMap(std::vector<std::size_t> observed, std::size_t dim)
    : observed_(std::move(observed)), dim_(dim) {
    if (observed_.empty()) throw std::invalid_argument("ObservationMap: at least one coordinate must be observed");
    std::set<std::size_t> seen;
    for (std::size_t i : observed_) {
        if (i >= dim_) throw std::invalid_argument("ObservationMap: coordinate " + std::to_string(i) + " out of range");
        if (!seen.insert(i).second) throw std::invalid_argument("ObservationMap: coordinate " + std::to_string(i) + " repeated");
    }
}

std::vector<double> ObservationMap::project(std::span<const double> state) const {
    return project_onto(state, observed_);
}

PartitionSpec PartitionSpec::with_u(std::vector<std::size_t> u, std::size_t dim) {
    PartitionSpec spec;
    std::set<std::size_t> in_u(u.begin(), u.end());
    spec.u = std::move(u);
    for (std::size_t i = 0; i < dim; ++i)
        if (!in_u.contains(i)) spec.w.push_back(i);
    spec.validate(dim);
    return spec;
}

void PartitionSpec::validate(std::size_t dim) const {
    std::vector<int> seen(dim, 0);
    for (const auto* block : {&u, &w}) {
        for (std::size_t i : *block) {
            if (i >= dim) throw std::invalid_argument("PartitionSpec: coordinate " + std::to_string(i) + " out of range");
            if (seen[i]++) throw std::invalid_argument("PartitionSpec: coordinate " + std::to_string(i) + " appears twice");
        }
    }
    for (std::size_t i = 0; i < dim; ++i)
        if (!seen[i]) throw std::invalid_argument("PartitionSpec: coordinate " + std::to_string(i) + " is in neither block");
}

// ------------------------------------------------------------------- checks

std::vector<std::vector<StateIndex>> equivalence_classes(const FiniteMdp& mdp, const ObservationMap& obs) {
    check_obs(mdp, obs);
    return classes_of(group_by(mdp, obs.observed()));
}

IgnorabilityReport check_partial_ignorability(const FiniteMdp& mdp, const PartitionSpec& partition,
                                              const ObservationMap& obs, const PolicyClass& policies, double tol) {
    partition.validate(mdp.state_dim());
    check_obs(mdp, obs);
    const auto& layout = mdp.layout();
    const Grouping u_groups = group_by(mdp, partition.u);
    const Grouping w_groups = group_by(mdp, partition.w);
    WitnessSink sink(tol);

    // (i) joint next-state law equals the product of its U and W marginals.
    std::vector<double> joint(u_groups.count * w_groups.count);
    std::vector<double> mu(u_groups.count), mw(w_groups.count);
    for (std::size_t p = 0; p < layout.size(); ++p) {
        std::fill(joint.begin(), joint.end(), 0.0);
        std::fill(mu.begin(), mu.end(), 0.0);
        std::fill(mw.begin(), mw.end(), 0.0);
        for (const auto& t : mdp.transitions(p)) {
            const std::size_t u = u_groups.id[t.next], w = w_groups.id[t.next];
            joint[u * w_groups.count + w] += t.prob;
            mu[u] += t.prob;
            mw[w] += t.prob;
        }
        double worst = 0.0;
        for (std::size_t u = 0; u < u_groups.count; ++u) {
            for (std::size_t w = 0; w < w_groups.count; ++w) {
                const double joint_uw = joint[u * w_groups.count + w];
                if (joint_uw == 0.0 && (mu[u] == 0.0 || mw[w] == 0.0)) continue;
                worst = std::max(worst, std::abs(joint_uw - mu[u] * mw[w]));
            }
        }
        const auto [x, a] = layout.pair(p);
        sink.offer({"factorization", x, std::nullopt, a, std::nullopt, worst, {}});
    }

    // (ii) every policy depends on the state only through its U block.
    const auto u_classes = classes_of(u_groups);
    for (std::size_t i = 0; i < policies.size(); ++i) {
        const Policy& pi = policies[i];
        for (const auto& cls : u_classes) {
            const StateIndex ref = cls.front();
            for (std::size_t k = 1; k < cls.size(); ++k) {
                double worst = 0.0;
                ActionIndex worst_a = 0;
                for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
                    const double d = std::abs(pi.prob(cls[k], a) - pi.prob(ref, a));
                    if (d > worst) {
                        worst = d;
                        worst_a = a;
                    }
                }
                sink.offer({"policy_measurability", cls[k], ref, worst_a, i, worst, {}});
            }
        }
    }

    // (iii) Gamma_U(. | x, a) agrees across observation-equivalent states.
    for (const auto& cls : classes_of(group_by(mdp, obs.observed()))) {
        if (cls.size() < 2) continue;
        for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
            std::vector<std::pair<StateIndex, std::vector<double>>> members;
            for (StateIndex x : cls)
                if (auto p = layout.find(x, a)) members.emplace_back(x, u_marginal(mdp, u_groups, *p));
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t k = i + 1; k < members.size(); ++k) {
                    double worst = 0.0;
                    for (std::size_t u = 0; u < u_groups.count; ++u)
                        worst = std::max(worst, std::abs(members[i].second[u] - members[k].second[u]));
                    sink.offer({"observation_invariance", members[i].first, members[k].first, a, std::nullopt, worst, {}});
                }
            }
        }
    }
    return std::move(sink).finish("partial_ignorability");
}

std::vector<IgnorabilityReport> check_partial_ignorability(const FiniteMdp& mdp, const PartitionSpec& partition,
                                                           std::span<const ObservationMap> per_time,
                                                           const PolicyClass& policies, double tol) {
    std::vector<IgnorabilityReport> reports;
    for (const auto& obs : per_time) reports.push_back(check_partial_ignorability(mdp, partition, obs, policies, tol));
    return reports;
}

IgnorabilityReport check_relative_ignorability(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& g,
                                               const Policy& policy, double tol) {
    check_obs(mdp, obs);
    // centre g first; E[g - c] = E[g] - c, and a constant g then gives exact zeros
    QFunction centred = g;
    if (g.size() > 0) {
        const auto [mn, mx] = std::minmax_element(g.values().begin(), g.values().end());
        const double c = *mn + (*mx - *mn) / 2.0;
        for (double& v : centred.values()) v -= c;
    }
    const QFunction next = expected_next_all(mdp, policy, centred);
    const auto& layout = mdp.layout();
    WitnessSink sink(tol);
    for (const auto& cls : classes_of(group_by(mdp, obs.observed()))) {
        if (cls.size() < 2) continue;
        for (ActionIndex a = 0; a < mdp.num_actions(); ++a) {
            std::optional<StateIndex> lo, hi;
            double lo_v = 0.0, hi_v = 0.0;
            for (StateIndex x : cls) {
                auto p = layout.find(x, a);
                if (!p) continue;
                const double v = next[*p];
                if (!lo || v < lo_v) lo = x, lo_v = v;
                if (!hi || v > hi_v) hi = x, hi_v = v;
            }
            if (lo && hi && *lo != *hi) sink.offer({"relative_ignorability", *lo, *hi, a, std::nullopt, hi_v - lo_v, {}});
        }
    }
    return std::move(sink).finish("relative_ignorability");
}

std::vector<IgnorabilityReport> check_relative_ignorability(const FiniteMdp& mdp,
                                                            std::span<const ObservationMap> per_time,
                                                            const QFunction& g, const Policy& policy, double tol) {
    std::vector<IgnorabilityReport> reports;
    for (const auto& obs : per_time) reports.push_back(check_relative_ignorability(mdp, obs, g, policy, tol));
    return reports;
}

IgnorabilityReport check_argmax_invariance(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& q,
                                           double tie_tol) {
    check_obs(mdp, obs);
    const auto& layout = mdp.layout();
    WitnessSink sink(tie_tol);
    std::vector<Witness> mismatched;
    for (const auto& cls : classes_of(group_by(mdp, obs.observed()))) {
        const auto reference = layout.allowed(cls.front());
        bool comparable = true;
        for (StateIndex x : cls) {
            const auto allowed = layout.allowed(x);
            if (!std::equal(allowed.begin(), allowed.end(), reference.begin(), reference.end())) {
                mismatched.push_back({"allowable_mismatch", x, cls.front(), std::nullopt, std::nullopt, 0.0, "allowable sets differ"});
                comparable = false;
            }
        }
        if (!comparable || cls.size() < 2) continue;

        std::vector<double> best(cls.size(), -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < cls.size(); ++i)
            for (ActionIndex a : reference) best[i] = std::max(best[i], q(cls[i], a));
        for (std::size_t i = 0; i < cls.size(); ++i) {
            for (std::size_t k = 0; k < cls.size(); ++k) {
                if (i == k) continue;
                // Regret at cls[i] of each greedy action of cls[k].
                for (ActionIndex a : reference) {
                    if (q(cls[k], a) < best[k] - tie_tol) continue;
                    const double regret = best[i] - q(cls[i], a);
                    sink.offer({"argmax_invariance", cls[i], cls[k], a, std::nullopt, regret, {}});
                }
            }
        }
    }
    IgnorabilityReport report = std::move(sink).finish("argmax_invariance");
    if (!mismatched.empty()) {
        report.verdict = Verdict::incomparable;
        report.note = "allowable action sets differ inside an observation class";
        report.witnesses.insert(report.witnesses.begin(), mismatched.begin(), mismatched.end());
    }
    return report;
}

IgnorabilityReport check_function_ignorability(const HiddenStateFunction& g,
                                               const std::vector<std::vector<double>>& hidden_values,
                                               const std::vector<std::vector<double>>& observed_values,
                                               std::span<const ActionIndex> actions, double tol) {
    if (hidden_values.empty()) throw std::invalid_argument("check_function_ignorability: hidden value set is empty");
    WitnessSink sink(tol);
    for (std::size_t o = 0; o < observed_values.size(); ++o) {
        for (ActionIndex a : actions) {
            std::size_t lo = 0, hi = 0;
            double lo_v = 0.0, hi_v = 0.0;
            for (std::size_t h = 0; h < hidden_values.size(); ++h) {
                const double v = g(observed_values[o], hidden_values[h], a);
                if (h == 0 || v < lo_v) lo = h, lo_v = v;
                if (h == 0 || v > hi_v) hi = h, hi_v = v;
            }
            sink.offer({"function_ignorability", o, hi, a, std::nullopt, hi_v - lo_v,
                        "observed value " + std::to_string(o) + ", hidden values " + std::to_string(lo) + " vs " +
                            std::to_string(hi)});
        }
    }
    return std::move(sink).finish("function_ignorability");
}

DegradationPlan selective_degradation(std::span<const AppFunction> functions, const std::set<std::size_t>& conflicting) {
    DegradationPlan plan;
    for (const auto& f : functions) {
        const bool touches = std::any_of(f.dependencies.begin(), f.dependencies.end(),
                                         [&](std::size_t d) { return conflicting.contains(d); });
        (touches ? plan.disabled : plan.enabled).push_back(f.name);
    }
    return plan;
}

// -------------------------------------------------------------------- audit

bool AuditResult::passed() const {
    return failed_assumptions.empty() &&
           std::all_of(iterates.begin(), iterates.end(), [](const IgnorabilityReport& r) { return r.passed(); });
}

namespace {

IgnorabilityReport relative_for_class(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& g,
                                      const PolicyClass& policies, double tol, std::string check) {
    WitnessSink sink(tol);
    for (std::size_t i = 0; i < policies.size(); ++i) sink.absorb(check_relative_ignorability(mdp, obs, g, policies[i], tol), i);
    return std::move(sink).finish(std::move(check));
}

}  // namespace

AuditResult iterate_and_audit(const FiniteMdp& mdp, const PartitionSpec& partition, const ObservationMap& obs,
                              const PolicyClass& policies, std::size_t iterations, double tol) {
    AuditResult result;

    IgnorabilityReport a1 = check_partial_ignorability(mdp, partition, obs, policies, tol);
    a1.check = "A1_partial_ignorability";
    IgnorabilityReport a2 = relative_for_class(mdp, obs, QFunction::from_rewards(mdp), policies, tol, "A2_reward_relative_ignorability");

    WitnessSink a3_sink(0.0);
    const std::set<std::size_t> u(partition.u.begin(), partition.u.end());
    for (std::size_t i : obs.observed()) {
        if (!u.contains(i))
            a3_sink.offer({"observation_within_u", 0, std::nullopt, std::nullopt, std::nullopt, 1.0,
                           "observed coordinate " + std::to_string(i) + " is not in I_U"});
    }
    IgnorabilityReport a3 = std::move(a3_sink).finish("A3_observation_within_u");

    if (!a1.passed()) result.failed_assumptions.push_back(Assumption::partial_ignorability);
    if (!a2.passed()) result.failed_assumptions.push_back(Assumption::reward_relative_ignorability);
    if (!a3.passed()) result.failed_assumptions.push_back(Assumption::observation_within_u);
    result.preconditions = {std::move(a1), std::move(a2), std::move(a3)};
    if (!result.failed_assumptions.empty()) return result;

    QFunction q(mdp);
    if (iterations == 0) {
        result.iterates.push_back(relative_for_class(mdp, obs, q, policies, tol, "iterate_0"));
        return result;
    }
    const OptimizationClass cls = policies;
    for (std::size_t k = 1; k <= iterations; ++k) {
        q = apply_optimality_operator(mdp, cls, q);
        result.iterates.push_back(relative_for_class(mdp, obs, q, policies, tol, "iterate_" + std::to_string(k)));
    }
    return result;
}

// --------------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const Witness& w) {
    j = nlohmann::json{{"condition", w.condition}, {"state", w.state}, {"magnitude", w.magnitude}};
    if (w.other_state) j["other_state"] = *w.other_state;
    if (w.action) j["action"] = *w.action;
    if (w.policy) j["policy"] = *w.policy;
    if (!w.note.empty()) j["note"] = w.note;
}

void to_json(nlohmann::json& j, const IgnorabilityReport& report) {
    j = nlohmann::json{{"check", report.check},
                       {"verdict", to_string(report.verdict)},
                       {"max_violation", report.max_violation},
                       {"tolerance", report.tolerance},
                       {"witnesses", report.witnesses}};
    if (!report.note.empty()) j["note"] = report.note;
}

void to_json(nlohmann::json& j, const AuditResult& result) {
    nlohmann::json failed = nlohmann::json::array();
    for (auto a : result.failed_assumptions) failed.push_back(to_string(a));
    j = nlohmann::json{{"passed", result.passed()},
                       {"failed_assumptions", failed},
                       {"preconditions", result.preconditions},
                       {"iterates", result.iterates}};
}

// ------------------------------------------------------------ policy class

PolicyClass measurable_policy_class(const FiniteMdp& mdp, std::span<const std::size_t> coordinates,
                                    std::size_t max_members) {
    for (std::size_t i : coordinates)
        if (i >= mdp.state_dim()) throw std::invalid_argument("measurable_policy_class: coordinate out of range");
    const auto& layout = mdp.layout();
    const auto classes = classes_of(group_by(mdp, coordinates));

    // Actions allowed everywhere in each class.
    std::vector<std::vector<ActionIndex>> choices;
    std::size_t total = 1;
    for (const auto& cls : classes) {
        std::vector<ActionIndex> common(layout.allowed(cls.front()).begin(), layout.allowed(cls.front()).end());
        for (StateIndex x : cls) {
            std::vector<ActionIndex> keep;
            const auto allowed = layout.allowed(x);
            std::set_intersection(common.begin(), common.end(), allowed.begin(), allowed.end(), std::back_inserter(keep));
            common = std::move(keep);
        }
        if (common.empty()) throw std::invalid_argument("measurable_policy_class: a class has no common allowable action");
        if (total > max_members / common.size() + 1) throw std::length_error("measurable_policy_class: class too large");
        total *= common.size();
        choices.push_back(std::move(common));
    }
    if (total + 1 > max_members) throw std::length_error("measurable_policy_class: " + std::to_string(total + 1) + " members exceed the cap");

    std::vector<Policy> members{Policy::uniform(mdp)};
    std::vector<std::size_t> digit(classes.size(), 0);
    std::vector<ActionIndex> choice(mdp.num_states());
    for (std::size_t n = 0; n < total; ++n) {
        for (std::size_t c = 0; c < classes.size(); ++c)
            for (StateIndex x : classes[c]) choice[x] = choices[c][digit[c]];
        members.push_back(Policy::deterministic(mdp, choice));
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (++digit[c] < choices[c].size()) break;
            digit[c] = 0;
        }
    }
    return PolicyClass(std::move(members));
}

}  // namespace rilab
