#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "offpol/rng.hpp"

namespace offpol {

using Context = std::uint32_t;
using Action = std::uint32_t;
using PolicyId = std::uint64_t;
/// A deterministic policy on a finite context space: entry x is the action
/// taken at context x.
using PolicyMap = std::vector<Action>;

class PolicyClass;

enum class NoiseKind { bernoulli, truncated_gaussian, deterministic };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

struct NoiseLaw {
    NoiseKind kind = NoiseKind::bernoulli;
    double sigma = 0.0;  // truncated_gaussian only

    bool operator==(const NoiseLaw&) const = default;
};

/// Mean of clamp(N(location, sigma^2), 0, 1).
double clipped_gaussian_mean(double location, double sigma);

/// Location whose clipped Gaussian has the requested mean (bisection; the
/// clipped mean is increasing in the location).
double recenter_clipped_gaussian(double target_mean, double sigma);

/// Contextual bandit on a finite context support. Rewards lie in [0, 1].
class BanditModel {
public:
    BanditModel(std::vector<double> context_probs, std::vector<std::vector<double>> mean_reward,
                NoiseLaw noise = {});
    BanditModel(std::vector<double> context_probs, std::vector<std::vector<double>> mean_reward,
                std::vector<std::vector<NoiseLaw>> noise);

    std::size_t num_contexts() const { return probs_.size(); }
    std::size_t num_actions() const { return num_actions_; }

    double context_prob(Context x) const { return probs_.at(x); }
    const std::vector<double>& context_probs() const { return probs_; }
    double mean(Context x, Action a) const { return means_[index(x, a)]; }
    const NoiseLaw& noise(Context x, Action a) const { return noise_[index(x, a)]; }

    Context sample_context(Rng& rng) const;
    double sample_reward(Context x, Action a, Rng& rng) const;

    bool operator==(const BanditModel& other) const {
        return probs_ == other.probs_ && means_ == other.means_ && noise_ == other.noise_ &&
               num_actions_ == other.num_actions_;
    }

private:
    std::size_t index(Context x, Action a) const { return x * num_actions_ + a; }
    void validate_and_prepare();

    std::vector<double> probs_;
    std::size_t num_actions_ = 0;
    std::vector<double> means_;
    std::vector<NoiseLaw> noise_;
    std::vector<double> locations_;  // recentered Gaussian locations
};

/// Exact value sum_x P(x) mu(x, pi(x)) over the finite support.
double policy_value(const BanditModel& model, std::span<const Action> policy);

/// max over the class of policy_value minus the value of `learned`.
double suboptimality(const BanditModel& model, const PolicyClass& policies,
                     std::span<const Action> learned);

}  // namespace offpol
