#include "offpol/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "offpol/error.hpp"
#include "offpol/rng.hpp"

namespace offpol {

namespace {

constexpr std::uint64_t kThompsonStream = 0x7468'6f6d'7073'6f6eULL;

void check_table(const std::vector<std::vector<double>>& table, std::size_t n, std::size_t k,
                 const std::string& what) {
    if (table.size() != n) throw InvalidArgument(what + ": need one row per context");
    for (std::size_t x = 0; x < n; ++x) {
        if (table[x].size() != k) throw InvalidArgument(what + ": row length must equal K");
        check_simplex(table[x], what + " row " + std::to_string(x));
    }
}

void copy_row(const std::vector<double>& row, std::span<double> out) {
    std::copy(row.begin(), row.end(), out.begin());
}

}  // namespace

History::History(std::size_t num_contexts, std::size_t num_actions)
    : num_contexts_(num_contexts),
      num_actions_(num_actions),
      counts_(num_contexts * num_actions, 0),
      sums_(num_contexts * num_actions, 0.0) {}

void History::record(Context x, Action a, double reward) {
    ++counts_[x * num_actions_ + a];
    sums_[x * num_actions_ + a] += reward;
    ++steps_;
}

bool on_simplex(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) return false;
        total += p;
    }
    return std::abs(total - 1.0) <= 1e-12;
}

void check_simplex(std::span<const double> probs, const std::string& where) {
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw InvalidArgument(where + ": negative or NaN propensity");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidArgument(where + ": propensities sum to " + std::to_string(total));
}

BehaviorPolicy::BehaviorPolicy(std::size_t num_contexts, std::size_t num_actions, Spec spec)
    : num_contexts_(num_contexts), num_actions_(num_actions), spec_(std::move(spec)) {
    if (num_contexts == 0) throw InvalidArgument("behavior policy needs at least one context");
    if (num_actions < 2) throw InvalidArgument("behavior policy needs K >= 2");
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FixedTable>) {
                check_table(s.table, num_contexts, num_actions, "fixed-table");
            } else if constexpr (std::is_same_v<S, EpsilonDecay>) {
                if (!(s.epsilon0 > 0.0) || !(s.decay >= 0.0))
                    throw InvalidArgument("epsilon-decay needs epsilon0 > 0 and decay >= 0");
            } else if constexpr (std::is_same_v<S, ThompsonLike>) {
                if (s.draws == 0) throw InvalidArgument("thompson-like needs draws >= 1");
            } else if constexpr (std::is_same_v<S, PolynomialFloor>) {
                if (!(s.c_bar > 0.0) || !(s.gamma >= 0.0))
                    throw InvalidArgument("polynomial-floor needs c_bar > 0 and gamma >= 0");
                if (s.floor_actions.size() != num_contexts)
                    throw InvalidArgument("polynomial-floor needs floor actions per context");
                for (const auto& acts : s.floor_actions) {
                    for (Action a : acts)
                        if (a >= num_actions) throw InvalidArgument("floor action out of range");
                    if (acts.size() == num_actions)
                        throw InvalidArgument("polynomial-floor needs a non-floor action per context");
                }
            } else {
                if (s.segments.empty() && !s.rule)
                    throw InvalidArgument("custom-schedule needs segments or a rule");
                for (std::size_t i = 0; i < s.segments.size(); ++i) {
                    if (i == 0 && s.segments[i].from_t != 1)
                        throw InvalidArgument("custom-schedule must start at t = 1");
                    if (i > 0 && s.segments[i].from_t <= s.segments[i - 1].from_t)
                        throw InvalidArgument("custom-schedule segments must start in increasing order");
                    check_table(s.segments[i].table, num_contexts, num_actions, "custom-schedule");
                }
            }
        },
        spec_);
}

BehaviorPolicy BehaviorPolicy::fixed(std::vector<std::vector<double>> table) {
    const std::size_t n = table.size();
    const std::size_t k = table.empty() ? 0 : table.front().size();
    return BehaviorPolicy(n, k, FixedTable{std::move(table)});
}

std::string BehaviorPolicy::kind_name() const {
    switch (spec_.index()) {
        case 0: return "fixed-table";
        case 1: return "epsilon-decay";
        case 2: return "thompson-like";
        case 3: return "polynomial-floor";
        default: return "custom-schedule";
    }
}

void BehaviorPolicy::propensities(const StepInfo& step, Context x, const History& history,
                                  std::span<double> out) const {
    const std::size_t k = num_actions_;
    const double t = static_cast<double>(step.t);
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FixedTable>) {
                copy_row(s.table[x], out);
            } else if constexpr (std::is_same_v<S, EpsilonDecay>) {
                const double eps = std::min(1.0, s.epsilon0 * std::pow(t, -s.decay));
                Action leader = 0;
                double best = -1.0;
                for (Action a = 0; a < k; ++a) {
                    const std::size_t n = history.count(x, a);
                    const double m = n == 0 ? 0.5 : history.reward_sum(x, a) / static_cast<double>(n);
                    if (m > best) {
                        best = m;
                        leader = a;
                    }
                }
                for (Action a = 0; a < k; ++a) out[a] = eps / static_cast<double>(k);
                out[leader] += 1.0 - eps;
            } else if constexpr (std::is_same_v<S, ThompsonLike>) {
                Rng rng(derive_seed(step.seed, {kThompsonStream, step.t}));
                std::vector<std::size_t> wins(k, 0);
                std::vector<std::gamma_distribution<double>> g1, g2;
                for (Action a = 0; a < k; ++a) {
                    const double n = static_cast<double>(history.count(x, a));
                    const double successes = history.reward_sum(x, a);
                    g1.emplace_back(1.0 + successes, 1.0);
                    g2.emplace_back(1.0 + n - successes, 1.0);
                }
                for (std::size_t d = 0; d < s.draws; ++d) {
                    Action leader = 0;
                    double best = -1.0;
                    for (Action a = 0; a < k; ++a) {
                        const double u = g1[a](rng);
                        const double v = g2[a](rng);
                        const double theta = u / (u + v);
                        if (theta > best) {
                            best = theta;
                            leader = a;
                        }
                    }
                    ++wins[leader];
                }
                const double log_t = std::log(static_cast<double>(std::max<std::size_t>(step.horizon, 2)));
                const double floor = std::exp(-log_t * log_t);
                const double scale = 1.0 - static_cast<double>(k) * floor;
                for (Action a = 0; a < k; ++a)
                    out[a] = floor + scale * static_cast<double>(wins[a]) / static_cast<double>(s.draws);
            } else if constexpr (std::is_same_v<S, PolynomialFloor>) {
                const auto& floors = s.floor_actions[x];
                const double g = s.c_bar * std::pow(t, -s.gamma);
                const double rest = (1.0 - g * static_cast<double>(floors.size())) /
                                    static_cast<double>(k - floors.size());
                for (Action a = 0; a < k; ++a) out[a] = rest;
                for (Action a : floors) out[a] = g;
            } else {
                if (s.rule) {
                    s.rule(step, x, history, out);
                    return;
                }
                auto it = std::upper_bound(s.segments.begin(), s.segments.end(), step.t,
                                           [](std::size_t tt, const ScheduleSegment& seg) {
                                               return tt < seg.from_t;
                                           });
                copy_row(std::prev(it)->table[x], out);
            }
        },
        spec_);
}

}  // namespace offpol
