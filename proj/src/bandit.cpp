#include "offpol/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "offpol/error.hpp"
#include "offpol/policy_class.hpp"

namespace offpol {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::bernoulli: return "bernoulli";
        case NoiseKind::truncated_gaussian: return "truncated-gaussian";
        case NoiseKind::deterministic: return "deterministic";
    }
    return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "bernoulli") return NoiseKind::bernoulli;
    if (name == "truncated-gaussian") return NoiseKind::truncated_gaussian;
    if (name == "deterministic") return NoiseKind::deterministic;
    throw InvalidArgument("unknown noise kind '" + name + "'");
}

double clipped_gaussian_mean(double location, double sigma) {
    const double lo = (0.0 - location) / sigma;
    const double hi = (1.0 - location) / sigma;
    const double mass_inside = normal_cdf(hi) - normal_cdf(lo);
    const double inside = location * mass_inside + sigma * (normal_pdf(lo) - normal_pdf(hi));
    return inside + (1.0 - normal_cdf(hi));
}

double recenter_clipped_gaussian(double target_mean, double sigma) {
    double lo = -1.0 - 40.0 * sigma;
    double hi = 2.0 + 40.0 * sigma;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (clipped_gaussian_mean(mid, sigma) < target_mean)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

BanditModel::BanditModel(std::vector<double> context_probs,
                         std::vector<std::vector<double>> mean_reward, NoiseLaw noise)
    : BanditModel(std::move(context_probs), mean_reward,
                  std::vector<std::vector<NoiseLaw>>(
                      mean_reward.size(),
                      std::vector<NoiseLaw>(mean_reward.empty() ? 0 : mean_reward.front().size(),
                                            noise))) {}

BanditModel::BanditModel(std::vector<double> context_probs,
                         std::vector<std::vector<double>> mean_reward,
                         std::vector<std::vector<NoiseLaw>> noise)
    : probs_(std::move(context_probs)) {
    if (probs_.empty()) throw InvalidArgument("model needs at least one context");
    if (mean_reward.size() != probs_.size() || noise.size() != probs_.size())
        throw InvalidArgument("mean_reward and noise need one row per context");
    num_actions_ = mean_reward.front().size();
    if (num_actions_ < 2) throw InvalidArgument("model needs K >= 2 actions");
    for (std::size_t x = 0; x < probs_.size(); ++x) {
        if (mean_reward[x].size() != num_actions_ || noise[x].size() != num_actions_)
            throw InvalidArgument("ragged mean_reward/noise table at context " + std::to_string(x));
        means_.insert(means_.end(), mean_reward[x].begin(), mean_reward[x].end());
        noise_.insert(noise_.end(), noise[x].begin(), noise[x].end());
    }
    validate_and_prepare();
}

void BanditModel::validate_and_prepare() {
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("context probability outside [0,1]");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("context probabilities must sum to 1");
    locations_.assign(means_.size(), 0.0);
    for (std::size_t i = 0; i < means_.size(); ++i) {
        if (!(means_[i] >= 0.0 && means_[i] <= 1.0))
            throw InvalidArgument("mean reward outside [0,1]");
        const NoiseLaw& law = noise_[i];
        if (law.kind == NoiseKind::truncated_gaussian) {
            if (!(law.sigma > 0.0)) throw InvalidArgument("truncated-gaussian needs sigma > 0");
            locations_[i] = recenter_clipped_gaussian(means_[i], law.sigma);
        }
    }
}

Context BanditModel::sample_context(Rng& rng) const {
    return static_cast<Context>(sample_categorical(probs_, rng));
}

double BanditModel::sample_reward(Context x, Action a, Rng& rng) const {
    const std::size_t i = index(x, a);
    switch (noise_[i].kind) {
        case NoiseKind::bernoulli: return rng.uniform() < means_[i] ? 1.0 : 0.0;
        case NoiseKind::deterministic: return means_[i];
        case NoiseKind::truncated_gaussian: {
            std::normal_distribution<double> normal(locations_[i], noise_[i].sigma);
            return std::clamp(normal(rng), 0.0, 1.0);
        }
    }
    return means_[i];
}

double policy_value(const BanditModel& model, std::span<const Action> policy) {
    if (policy.size() < model.num_contexts())
        throw InvalidArgument("policy map is undefined on some context of the model");
    double value = 0.0;
    for (Context x = 0; x < model.num_contexts(); ++x) {
        if (policy[x] >= model.num_actions())
            throw InvalidArgument("policy map uses an action outside the model");
        value += model.context_prob(x) * model.mean(x, policy[x]);
    }
    return value;
}

double suboptimality(const BanditModel& model, const PolicyClass& policies,
                     std::span<const Action> learned) {
    if (policies.empty()) throw InvalidArgument("suboptimality over an empty class");
    double best = -1.0;
    for (const Policy& p : policies.policies()) best = std::max(best, policy_value(model, p.actions));
    return best - policy_value(model, learned);
}

}  // namespace offpol
