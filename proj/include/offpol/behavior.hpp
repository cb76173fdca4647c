#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "offpol/bandit.hpp"

namespace offpol {

/// Per-(context, action) sufficient statistics of the realized history H_t.
class History {
public:
    History(std::size_t num_contexts, std::size_t num_actions);

    void record(Context x, Action a, double reward);

    std::size_t steps() const { return steps_; }
    std::size_t count(Context x, Action a) const { return counts_[x * num_actions_ + a]; }
    double reward_sum(Context x, Action a) const { return sums_[x * num_actions_ + a]; }
    std::size_t num_contexts() const { return num_contexts_; }
    std::size_t num_actions() const { return num_actions_; }

private:
    std::size_t num_contexts_;
    std::size_t num_actions_;
    std::size_t steps_ = 0;
    std::vector<std::size_t> counts_;
    std::vector<double> sums_;
};

/// Inputs of a propensity query besides the context and history.
struct StepInfo {
    std::size_t t = 1;        // 1-based step index
    std::size_t horizon = 1;  // T
    std::uint64_t seed = 0;   // dataset seed; policies derive private sub-streams from it
};

struct FixedTable {
    std::vector<std::vector<double>> table;  // table[x][a] = e(x, a)
};

/// e_t = eps_t / K + (1 - eps_t) * 1{a = empirical leader}, eps_t = min(1, eps0 * t^-decay).
/// Empty cells count as mean 0.5; ties go to the smallest action.
struct EpsilonDecay {
    double epsilon0 = 1.0;
    double decay = 0.5;
};

/// Beta(1,1)-prior posterior probability of optimality per context, estimated
/// with `draws` Monte Carlo samples from a per-step sub-stream, then mixed with
/// the floor T^{-ln T} so that every action keeps at least that propensity.
struct ThompsonLike {
    std::size_t draws = 1024;
};

/// Each floor action at context x gets exactly c_bar * t^-gamma; the remaining
/// mass is spread uniformly over the other actions.
struct PolynomialFloor {
    double c_bar = 0.5;
    double gamma = 0.5;
    std::vector<std::vector<Action>> floor_actions;  // per context
};

/// Piecewise-constant, history-independent schedule: segment i applies from
/// step from_t[i] until the next segment starts.
struct ScheduleSegment {
    std::size_t from_t = 1;
    std::vector<std::vector<double>> table;
};

/// Arbitrary propensity rule. Either a list of segments (serializable) or a
/// callable that may read the history.
struct CustomSchedule {
    using Rule = std::function<void(const StepInfo&, Context, const History&, std::span<double>)>;
    std::vector<ScheduleSegment> segments;
    Rule rule;
};

/// A logging policy e_t(x, a | H_t).
class BehaviorPolicy {
public:
    using Spec = std::variant<FixedTable, EpsilonDecay, ThompsonLike, PolynomialFloor, CustomSchedule>;

    BehaviorPolicy(std::size_t num_contexts, std::size_t num_actions, Spec spec);

    static BehaviorPolicy fixed(std::vector<std::vector<double>> table);

    std::size_t num_contexts() const { return num_contexts_; }
    std::size_t num_actions() const { return num_actions_; }
    const Spec& spec() const { return spec_; }
    std::string kind_name() const;
    bool is_fixed_table() const { return std::holds_alternative<FixedTable>(spec_); }

    /// Writes e_t(x, . | H_t) into `out` (length K). The result is not checked
    /// here; samplers validate it.
    void propensities(const StepInfo& step, Context x, const History& history,
                      std::span<double> out) const;

private:
    std::size_t num_contexts_;
    std::size_t num_actions_;
    Spec spec_;
};

/// True when `probs` is elementwise >= 0 and sums to 1 within 1e-12.
bool on_simplex(std::span<const double> probs);

/// Throws InvalidArgument unless `probs` is elementwise >= 0 and sums to 1
/// within 1e-12.
void check_simplex(std::span<const double> probs, const std::string& where);

}  // namespace offpol
