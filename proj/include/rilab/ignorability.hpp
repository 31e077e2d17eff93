#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rilab/bellman.hpp"
#include "rilab/mdp.hpp"
#include "rilab/qfunction.hpp"

namespace rilab {

inline constexpr double kDefaultIgnorabilityTolerance = 1e-9;
inline constexpr double kArgmaxTieTolerance = 1e-9;
/// Reports keep at most this many witnesses, largest violations first.
inline constexpr std::size_t kMaxWitnesses = 32;

/// Projection of a state vector onto the observed coordinates (0-based).
class ObservationMap {
public:
    /// Throws std::invalid_argument when `observed` is empty, repeats an
    /// index, or names a coordinate >= dim.
    ObservationMap(std::vector<std::size_t> observed, std::size_t dim);

    std::span<const std::size_t> observed() const { return observed_; }
    std::size_t dim() const { return dim_; }
    std::vector<double> project(std::span<const double> state) const;

private:
    std::vector<std::size_t> observed_;
    std::size_t dim_;
};

/// Split of the coordinates into the U block (drives policies and observed
/// dynamics) and the W block (independent residual).
struct PartitionSpec {
    std::vector<std::size_t> u;
    std::vector<std::size_t> w;

    /// Partition with the given U block and W = everything else.
    static PartitionSpec with_u(std::vector<std::size_t> u, std::size_t dim);
    /// Throws std::invalid_argument unless u and w are disjoint and cover 0..dim-1.
    void validate(std::size_t dim) const;
};

enum class Verdict { pass, fail, incomparable };

/// Assumptions required by the preservation audit.
enum class Assumption {
    partial_ignorability,         // A1
    reward_relative_ignorability, // A2
    observation_within_u,         // A3
};

std::string to_string(Verdict v);
std::string to_string(Assumption a);

struct Witness {
    std::string condition;
    StateIndex state = 0;
    std::optional<StateIndex> other_state;
    std::optional<ActionIndex> action;
    std::optional<std::size_t> policy;
    double magnitude = 0.0;
    std::string note;
};

struct IgnorabilityReport {
    std::string check;
    Verdict verdict = Verdict::pass;
    double max_violation = 0.0;
    double tolerance = 0.0;
    std::vector<Witness> witnesses;
    std::string note;

    bool passed() const { return verdict == Verdict::pass; }
};

void to_json(nlohmann::json& j, const Witness& w);
void to_json(nlohmann::json& j, const IgnorabilityReport& report);

/// States grouped by exactly equal projections, classes in order of first
/// appearance and states ascending inside each class.
std::vector<std::vector<StateIndex>> equivalence_classes(const FiniteMdp& mdp, const ObservationMap& obs);

/// The three conditions of partial ignorability: product-form kernel rows
/// over (U, W), policies measurable in U, and Gamma_U constant on
/// observation classes. Only Gamma_U is constrained across states.
IgnorabilityReport check_partial_ignorability(const FiniteMdp& mdp, const PartitionSpec& partition,
                                              const ObservationMap& obs, const PolicyClass& policies,
                                              double tol = kDefaultIgnorabilityTolerance);

/// One report per time index for a sequence of observation maps.
std::vector<IgnorabilityReport> check_partial_ignorability(const FiniteMdp& mdp, const PartitionSpec& partition,
                                                           std::span<const ObservationMap> per_time,
                                                           const PolicyClass& policies,
                                                           double tol = kDefaultIgnorabilityTolerance);

/// max over actions and observation classes of the spread of
/// expected_next(g) between observation-equivalent states.
IgnorabilityReport check_relative_ignorability(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& g,
                                               const Policy& policy, double tol = kDefaultIgnorabilityTolerance);

std::vector<IgnorabilityReport> check_relative_ignorability(const FiniteMdp& mdp,
                                                            std::span<const ObservationMap> per_time,
                                                            const QFunction& g, const Policy& policy,
                                                            double tol = kDefaultIgnorabilityTolerance);

/// Greedy action sets (ties within 1e-9) must coincide on every observation
/// class. The violation reported is the regret of playing another class
/// member's greedy action. Classes with differing allowable sets make the
/// verdict `incomparable`.
IgnorabilityReport check_argmax_invariance(const FiniteMdp& mdp, const ObservationMap& obs, const QFunction& q,
                                           double tie_tol = kArgmaxTieTolerance);

using HiddenStateFunction =
    std::function<double(std::span<const double> observed, std::span<const double> hidden, ActionIndex action)>;

/// g(observed, hidden, a) must not vary over the hidden values.
IgnorabilityReport check_function_ignorability(const HiddenStateFunction& g,
                                               const std::vector<std::vector<double>>& hidden_values,
                                               const std::vector<std::vector<double>>& observed_values,
                                               std::span<const ActionIndex> actions,
                                               double tol = kDefaultIgnorabilityTolerance);

struct AppFunction {
    std::string name;
    std::set<std::size_t> dependencies;
};

struct DegradationPlan {
    std::vector<std::string> enabled;
    std::vector<std::string> disabled;
};

/// Disables exactly the functions whose dependencies meet the conflicting set.
DegradationPlan selective_degradation(std::span<const AppFunction> functions, const std::set<std::size_t>& conflicting);

struct AuditResult {
    std::vector<Assumption> failed_assumptions;
    std::vector<IgnorabilityReport> preconditions;
    /// One report per Bellman iterate (a single report for Q = 0 when no
    /// iterations are requested).
    std::vector<IgnorabilityReport> iterates;

    bool passed() const;
};

// Checks A1-A3, then applies the optimality operator over `policies` from
// Q = 0 and audits relative ignorability of every iterate for every member.
AuditResult iterate_and_audit(const FiniteMdp& mdp, const PartitionSpec& partition, const ObservationMap& obs,
                              const PolicyClass& policies, std::size_t iterations,
                              double tol = kDefaultIgnorabilityTolerance);

void to_json(nlohmann::json& j, const AuditResult& result);

/// Uniform policy plus every deterministic policy that depends on the state
/// only through the given coordinates. Throws std::length_error above
/// `max_members`.
PolicyClass measurable_policy_class(const FiniteMdp& mdp, std::span<const std::size_t> coordinates,
                                    std::size_t max_members = 4096);

}  // namespace rilab
