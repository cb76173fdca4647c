#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "offpol/bandit.hpp"
#include "offpol/behavior.hpp"
#include "offpol/hard_instances.hpp"
#include "offpol/policy_class.hpp"

namespace offpol {

// JSON forms of the domain objects. Configuration files are JSON documents
// made of nested tables; the schemas are documented in the README.

nlohmann::json to_json(const BanditModel& model);
BanditModel model_from_json(const nlohmann::json& j);

/// Segment-based custom schedules serialize; callable rules do not.
nlohmann::json to_json(const BehaviorPolicy& policy);
BehaviorPolicy behavior_from_json(const nlohmann::json& j, std::size_t num_contexts,
                                  std::size_t num_actions);

/// {"generator": "all-maps" | "threshold" | "explicit", ...}
nlohmann::json to_json(const PolicyClass& policies);
PolicyClass class_from_json(const nlohmann::json& j);

/// A hard-instance family without a horizon. When `delta_gap` is unset the gap
/// is calibrated to each horizon.
struct HardFamily {
    std::size_t d = 1;
    std::size_t K = 3;
    std::vector<int> v;
    Overlap overlap = FixedOverlap{};
    std::optional<double> delta_gap;

    bool adaptive() const { return std::holds_alternative<DecayingOverlap>(overlap); }
    /// Spec at horizon T (gap calibrated when unset).
    HardInstanceSpec at(std::size_t T) const;
};

struct InlineInstance {
    BanditModel model;
    BehaviorPolicy behavior;
    PolicyClass policies;
};

using InstanceConfig = std::variant<HardFamily, InlineInstance>;

/// {"family": "lower-fixed" | "lower-adaptive", d, K, v, C_star | (c_bar, gamma), delta_gap?}
/// or {"family": "inline", "model": ..., "behavior": ..., "class": ...}.
InstanceConfig instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InstanceConfig& instance);

/// Reads and parses a JSON file, raising ParseError with the path on failure.
nlohmann::json read_json_file(const std::string& path);

}  // namespace offpol
