#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "offpol/bandit.hpp"
#include "offpol/behavior.hpp"
#include "offpol/policy_class.hpp"

namespace offpol {

// Shattered-set Bernoulli instances used for minimax lower bounds. Contexts
// x_1..x_d are indices 0..d-1, f1 is action 0 and f2 is action 1. At x_i the
// reward is Bern(1/2) under f1, Bern(1/2 + v_i * gap) under f2 and Bern(0)
// under every other action. The class is the 2^d maps choosing f1 or f2 per
// context; the id of a map has bit i set when it picks f2 at x_i.

struct FixedOverlap {
    double c_star = 0.5;  // e(x, f1) = e(x, f2) = C*
};

struct DecayingOverlap {
    double c_bar = 0.5;  // e_t(x, f1) = e_t(x, f2) = c_bar * t^-gamma
    double gamma = 0.5;
};

using Overlap = std::variant<FixedOverlap, DecayingOverlap>;

struct HardInstanceSpec {
    std::size_t d = 1;
    std::size_t K = 3;
    std::vector<int> v;  // signs, one per context
    Overlap overlap = FixedOverlap{};
    std::size_t T = 1;
    double delta_gap = 0.1;
};

struct HardInstance {
    BanditModel model;
    BehaviorPolicy behavior;
    PolicyClass policies;
    PolicyId optimal_id = 0;  // pi*_v: f2 exactly where v_i = +1
};

inline constexpr std::size_t kMaxHardInstanceDim = 16;

/// Fixed regime: residual mass (1 - 2 C*) / (K - 2) on each other action. With
/// K = 2 only C* = 1/2 is accepted.
HardInstance build_fixed_instance(const HardInstanceSpec& spec);

/// Adaptive regime: history-independent schedule c_bar * t^-gamma on f1 and f2
/// with the residual spread over the others. Needs K >= 3, c_bar <= 1/2 and
/// gamma in (0, 1].
HardInstance build_adaptive_instance(const HardInstanceSpec& spec);

/// Dispatches on the overlap alternative.
HardInstance build_instance(const HardInstanceSpec& spec);

/// Gap used by the lower-bound construction: sqrt(d / (24 C* T)) for fixed
/// overlap, sqrt((1 - gamma) d / (24 c_bar T^(1-gamma))) for decaying overlap.
/// Throws unless the result is below 1/4.
double calibrated_gap(std::size_t d, std::size_t T, const Overlap& overlap);

/// 0.12 sqrt(d / (C* T)), or 0.12 sqrt(d / T^(1-gamma)) sqrt((1 - gamma) / c_bar).
/// Throws when the lower bound's precondition on T fails.
double minimax_floor(std::size_t d, std::size_t T, const Overlap& overlap);

/// Policy map for a class id of the hard-instance family.
PolicyMap hard_policy_map(std::size_t d, PolicyId id);

}  // namespace offpol
