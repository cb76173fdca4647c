#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "offpol/config.hpp"
#include "offpol/dataset.hpp"
#include "offpol/estimation.hpp"
#include "offpol/numeric.hpp"

namespace offpol {

struct OutputSpec {
    std::string dir;  // empty: nothing is written
    bool csv = true;
    bool json = true;
};

struct ExperimentConfig {
    InstanceConfig instance;
    Regime regime = Regime::batched;
    std::vector<std::size_t> T_grid;
    std::size_t replications = 1;
    double delta = 0.1;
    double beta_multiplier = 1.0;
    std::optional<double> beta_override;  // absolute beta, replaces the schedule
    double alpha = 2.0;                   // adaptive schedule exponent
    RewardModel::Kind reward_model = RewardModel::Kind::zero;
    std::uint64_t base_seed = 0;
    std::size_t workers = 1;
    std::optional<std::size_t> ndim;  // inline instances; brute force when unset
    OutputSpec outputs;

    /// Throws InvalidArgument on an empty or non-increasing grid, zero
    /// replications, delta outside (0, 1) or a multiplier below 1.
    void validate() const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct RunRow {
    std::size_t T = 0;
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    std::string learner;  // greedy | pessimistic
    std::optional<PolicyId> chosen_policy;
    double subopt = 0.0;
    double radius_at_opt = 0.0;
    bool event_held = false;
    double bound_2R = 0.0;
    bool certificate_ok = true;
    std::string error;
};

/// Per-horizon quantities fixed by the configuration rather than the draws.
struct GridPoint {
    std::size_t T = 0;
    double beta = 0.0;
    std::optional<double> delta_gap;
    std::optional<double> minimax_floor;
};

struct LearnerAggregate {
    double mean_subopt = 0.0;
    double median_subopt = 0.0;
    std::size_t errors = 0;
};

struct Aggregate {
    std::size_t T = 0;
    std::size_t replications = 0;
    double coverage = 0.0;
    double mean_bound_2R = 0.0;
    LearnerAggregate pessimistic;
    LearnerAggregate greedy;
    std::size_t certificate_violations = 0;
};

struct RunResult {
    std::vector<RunRow> rows;  // sorted by (T, replication, learner)
    std::vector<GridPoint> grid;
    std::size_t ndim = 0;
    std::optional<double> predicted_slope;  // log-corrected theoretical slope
};

/// Deterministic given the configuration; replication r at grid index g uses
/// derive_seed(base_seed, {g, r}) regardless of the worker count.
RunResult run_experiment(const ExperimentConfig& config);

/// Per-horizon summaries computed from the rows.
std::vector<Aggregate> aggregate(const RunResult& result);

struct CoveragePoint {
    std::size_t T = 0;
    double frequency = 0.0;
};

/// Fraction of replications whose concentration event held, per horizon.
std::vector<CoveragePoint> coverage_frequency(const RunResult& result);

enum class Statistic { mean, median };
std::string to_string(Statistic s);
Statistic statistic_from_string(const std::string& name);

struct SlopeFit {
    LinearFit fit;
    std::vector<std::size_t> used_T;
    std::vector<std::string> warnings;
};

/// OLS of ln(statistic subopt) on ln T. Horizons with a non-positive
/// statistic are dropped with a warning; fewer than 3 survivors is an error.
SlopeFit scaling_slope(const RunResult& result, const std::string& learner, Statistic statistic);

void write_runs_csv(std::ostream& out, const RunResult& result);
RunResult read_runs_csv(std::istream& in);

nlohmann::json aggregates_json(const RunResult& result);
nlohmann::json meta_json(const ExperimentConfig& config, const RunResult& result);

/// Writes runs.csv and/or aggregates.json + meta.json into config.outputs.dir.
void write_outputs(const ExperimentConfig& config, const RunResult& result);

inline constexpr const char* kVersion = "offpol 1.0.0";

}  // namespace offpol
