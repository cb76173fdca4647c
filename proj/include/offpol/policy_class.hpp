#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offpol/bandit.hpp"

namespace offpol {

struct Policy {
    PolicyId id = 0;
    PolicyMap actions;

    bool operator==(const Policy&) const = default;
};

/// How a class was produced, kept so it can be written back compactly.
struct ClassGenerator {
    std::string name = "explicit";  // all-maps | threshold | explicit
    Action below = 0;                // threshold only
    Action above = 1;                // threshold only
};

/// Finite set of deterministic policies over contexts 0..num_contexts-1.
/// Immutable after construction; policies are stored in increasing id order.
class PolicyClass {
public:
    PolicyClass(std::size_t num_contexts, std::size_t num_actions, std::vector<Policy> policies,
                std::optional<std::size_t> declared_ndim = std::nullopt);

    /// All K^n maps; the id of a map is its base-K encoding (context 0 is the
    /// least significant digit).
    static PolicyClass all_maps(std::size_t num_contexts, std::size_t num_actions);

    /// pi_c(x) = below if x < c else above, for c = 0..n (n+1 policies, id c).
    static PolicyClass threshold(std::size_t num_contexts, std::size_t num_actions, Action below,
                                 Action above);

    std::size_t num_contexts() const { return num_contexts_; }
    std::size_t num_actions() const { return num_actions_; }
    std::size_t size() const { return policies_.size(); }
    bool empty() const { return policies_.empty(); }

    /// Stable iteration in id order.
    std::span<const Policy> policies() const { return policies_; }
    const Policy* find(PolicyId id) const;
    const Policy& at(PolicyId id) const;

    std::optional<std::size_t> declared_ndim() const { return declared_ndim_; }
    const ClassGenerator& generator() const { return generator_; }

    /// Groups of ids sharing an identical action map (only groups of size >= 2).
    std::vector<std::vector<PolicyId>> duplicate_groups() const;

private:
    std::size_t num_contexts_;
    std::size_t num_actions_;
    std::vector<Policy> policies_;
    std::optional<std::size_t> declared_ndim_;
    ClassGenerator generator_;
};

/// Evidence that `subset` is shattered: f1 and f2 differ at every point and
/// realizing[mask] takes f1 on the points whose bit is set in mask and f2 on
/// the rest.
struct ShatteringWitness {
    std::vector<Context> subset;
    PolicyMap f1;
    PolicyMap f2;
    std::vector<PolicyId> realizing;
};

struct NatarajanResult {
    std::size_t dimension = 0;
    std::optional<ShatteringWitness> witness;  // present when dimension >= 1
};

inline constexpr std::size_t kMaxBruteForceContexts = 20;
inline constexpr std::size_t kMaxBruteForcePolicies = 1'000'000;

/// Brute-force Natarajan dimension. Throws SizeError outside the brute-force
/// regime (more than 20 contexts or more than 10^6 policies).
NatarajanResult natarajan_search(const PolicyClass& policies);
std::size_t natarajan_dimension(const PolicyClass& policies);

/// Checks a witness against the class clause by clause.
bool verify_witness(const PolicyClass& policies, const ShatteringWitness& witness);

struct RealizedActionSet {
    std::vector<Context> contexts_seq;
    std::vector<PolicyMap> action_vectors;    // (pi(X_1), ..., pi(X_T)), deduplicated
    std::vector<PolicyId> representatives;    // smallest id realizing each vector
};

RealizedActionSet realized_actions(const PolicyClass& policies, std::span<const Context> contexts_seq);

/// support^ndim * K^(2 ndim), the Natarajan-lemma cap on distinct restrictions
/// of a class to `support` points. Returned as a double since it overflows
/// integers quickly.
double natarajan_count_bound(std::size_t support, std::size_t num_actions, std::size_t ndim);

}  // namespace offpol
