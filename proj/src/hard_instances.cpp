#include "offpol/hard_instances.hpp"

#include <cmath>

#include "offpol/error.hpp"

namespace offpol {

namespace {

constexpr Action kF1 = 0;
constexpr Action kF2 = 1;

void validate_common(const HardInstanceSpec& spec) {
    if (spec.d < 1) throw InvalidArgument("hard instance needs d >= 1");
    if (spec.d > kMaxHardInstanceDim)
        throw SizeError("hard instance class is materialized only for d <= 16");
    if (spec.K < 2) throw InvalidArgument("hard instance needs K >= 2");
    if (spec.v.size() != spec.d) throw InvalidArgument("sign vector v must have d entries");
    for (int s : spec.v)
        if (s != 1 && s != -1) throw InvalidArgument("sign vector entries must be +1 or -1");
    if (!(spec.delta_gap > 0.0 && spec.delta_gap < 0.25))
        throw InvalidArgument("gap must lie in (0, 1/4)");
    if (spec.T < 1) throw InvalidArgument("hard instance needs T >= 1");
}

BanditModel shattered_model(const HardInstanceSpec& spec) {
    std::vector<double> probs(spec.d, 1.0 / static_cast<double>(spec.d));
    std::vector<std::vector<double>> means(spec.d, std::vector<double>(spec.K, 0.0));
    for (std::size_t i = 0; i < spec.d; ++i) {
        means[i][kF1] = 0.5;
        means[i][kF2] = 0.5 + spec.v[i] * spec.delta_gap;
    }
    return BanditModel(std::move(probs), std::move(means), NoiseLaw{NoiseKind::bernoulli, 0.0});
}

PolicyClass shattered_class(const HardInstanceSpec& spec) {
    const std::size_t count = std::size_t{1} << spec.d;
    std::vector<Policy> policies;
    policies.reserve(count);
    for (PolicyId id = 0; id < count; ++id) policies.push_back(Policy{id, hard_policy_map(spec.d, id)});
    return PolicyClass(spec.d, spec.K, std::move(policies), spec.d);
}

PolicyId optimal_id(const HardInstanceSpec& spec) {
    PolicyId id = 0;
    for (std::size_t i = 0; i < spec.d; ++i)
        if (spec.v[i] > 0) id |= PolicyId{1} << i;
    return id;
}

}  // namespace

PolicyMap hard_policy_map(std::size_t d, PolicyId id) {
    PolicyMap map(d);
    for (std::size_t i = 0; i < d; ++i) map[i] = (id >> i) & 1U ? kF2 : kF1;
    return map;
}

HardInstance build_fixed_instance(const HardInstanceSpec& spec) {
    validate_common(spec);
    const auto* overlap = std::get_if<FixedOverlap>(&spec.overlap);
    if (overlap == nullptr) throw InvalidArgument("build_fixed_instance needs a fixed overlap");
    const double c = overlap->c_star;
    if (!(c > 0.0 && c <= 0.5)) throw InvalidArgument("C* must lie in (0, 1/2]");
    if (spec.K == 2 && c != 0.5) throw InvalidArgument("with K = 2 the construction needs C* = 1/2");
    std::vector<std::vector<double>> table(spec.d, std::vector<double>(spec.K, 0.0));
    const double residual = spec.K > 2 ? (1.0 - 2.0 * c) / static_cast<double>(spec.K - 2) : 0.0;
    for (auto& row : table) {
        for (double& p : row) p = residual;
        row[kF1] = c;
        row[kF2] = c;
    }
    return HardInstance{shattered_model(spec), BehaviorPolicy::fixed(std::move(table)),
                        shattered_class(spec), optimal_id(spec)};
}

HardInstance build_adaptive_instance(const HardInstanceSpec& spec) {
    validate_common(spec);
    const auto* overlap = std::get_if<DecayingOverlap>(&spec.overlap);
    if (overlap == nullptr) throw InvalidArgument("build_adaptive_instance needs a decaying overlap");
    if (spec.K < 3) throw InvalidArgument("adaptive construction needs K >= 3 for the residual mass");
    if (!(overlap->c_bar > 0.0 && overlap->c_bar <= 0.5))
        throw InvalidArgument("adaptive construction needs 0 < c_bar <= 1/2");
    // gamma = 1 gives a valid schedule; only the gap calibration needs gamma < 1
    if (!(overlap->gamma > 0.0 && overlap->gamma <= 1.0))
        throw InvalidArgument("adaptive construction needs gamma in (0, 1]");
    PolynomialFloor schedule{overlap->c_bar, overlap->gamma,
                             std::vector<std::vector<Action>>(spec.d, std::vector<Action>{kF1, kF2})};
    return HardInstance{shattered_model(spec), BehaviorPolicy(spec.d, spec.K, std::move(schedule)),
                        shattered_class(spec), optimal_id(spec)};
}

HardInstance build_instance(const HardInstanceSpec& spec) {
    if (std::holds_alternative<FixedOverlap>(spec.overlap)) return build_fixed_instance(spec);
    return build_adaptive_instance(spec);
}

double calibrated_gap(std::size_t d, std::size_t T, const Overlap& overlap) {
    if (d < 1 || T < 1) throw InvalidArgument("calibrated_gap needs d >= 1 and T >= 1");
    const double dd = static_cast<double>(d);
    const double tt = static_cast<double>(T);
    double gap = 0.0;
    if (const auto* f = std::get_if<FixedOverlap>(&overlap)) {
        if (!(f->c_star > 0.0)) throw InvalidArgument("C* must be positive");
        gap = std::sqrt(dd / (24.0 * f->c_star * tt));
    } else {
        const auto& a = std::get<DecayingOverlap>(overlap);
        if (!(a.c_bar > 0.0) || !(a.gamma >= 0.0 && a.gamma < 1.0))
            throw InvalidArgument("decaying overlap needs c_bar > 0 and gamma in [0, 1)");
        gap = std::sqrt((1.0 - a.gamma) * dd / (24.0 * a.c_bar * std::pow(tt, 1.0 - a.gamma)));
    }
    if (!(gap < 0.25))
        throw InvalidArgument("calibrated gap " + std::to_string(gap) +
                              " is not below 1/4; horizon too short for this overlap");
    return gap;
}

double minimax_floor(std::size_t d, std::size_t T, const Overlap& overlap) {
    if (d < 1 || T < 1) throw InvalidArgument("minimax_floor needs d >= 1 and T >= 1");
    const double dd = static_cast<double>(d);
    const double tt = static_cast<double>(T);
    if (const auto* f = std::get_if<FixedOverlap>(&overlap)) {
        if (!(f->c_star > 0.0)) throw InvalidArgument("C* must be positive");
        if (dd / (f->c_star * tt) > 1.5) throw InvalidArgument("minimax floor needs d / (C* T) <= 1.5");
        return 0.12 * std::sqrt(dd / (f->c_star * tt));
    }
    const auto& a = std::get<DecayingOverlap>(overlap);
    if (!(a.c_bar > 0.0) || !(a.gamma >= 0.0 && a.gamma < 1.0))
        throw InvalidArgument("decaying overlap needs c_bar > 0 and gamma in [0, 1)");
    const double tpow = std::pow(tt, 1.0 - a.gamma);
    if ((1.0 - a.gamma) * dd > 1.5 * a.c_bar * tpow)
        throw InvalidArgument("minimax floor needs (1 - gamma) d <= 1.5 c_bar T^(1-gamma)");
    return 0.12 * std::sqrt(dd / tpow) * std::sqrt((1.0 - a.gamma) / a.c_bar);
}

}  // namespace offpol
