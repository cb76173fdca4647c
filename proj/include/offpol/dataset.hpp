#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offpol/bandit.hpp"
#include "offpol/behavior.hpp"

namespace offpol {

enum class Regime { batched, adaptive, batched_crossfit };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct LogRecord {
    std::size_t t = 1;  // 1-based
    Context context = 0;
    Action action = 0;
    double reward = 0.0;

    bool operator==(const LogRecord&) const = default;
};

/// Offline data D = {(X_t, A_t, Y_t)} together with the full propensity
/// vector e_t(X_t, . | H_t) logged at every step.
class LoggedDataset {
public:
    LoggedDataset(std::size_t num_contexts, std::size_t num_actions, Regime regime,
                  std::uint64_t seed = 0);

    /// Appends a record; rejects propensity vectors off the simplex, a zero
    /// propensity on the logged action and rewards outside [0, 1].
    void push_back(const LogRecord& record, std::span<const double> propensities);
    void reserve(std::size_t n);

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t num_contexts() const { return num_contexts_; }
    std::size_t num_actions() const { return num_actions_; }
    Regime regime() const { return regime_; }
    std::uint64_t seed() const { return seed_; }

    const LogRecord& record(std::size_t i) const { return records_[i]; }
    std::span<const LogRecord> records() const { return records_; }
    std::span<const double> propensities(std::size_t i) const {
        return {propensities_.data() + i * num_actions_, num_actions_};
    }
    double propensity(std::size_t i, Action a) const { return propensities_[i * num_actions_ + a]; }

    /// Copy holding only the listed records, in the listed order.
    LoggedDataset subset(std::span<const std::size_t> indices) const;

    bool operator==(const LoggedDataset& other) const = default;

private:
    std::size_t num_contexts_;
    std::size_t num_actions_;
    Regime regime_;
    std::uint64_t seed_;
    std::vector<LogRecord> records_;
    std::vector<double> propensities_;  // row-major, size() x num_actions
};

/// T i.i.d. records from a fixed-table behavior policy.
LoggedDataset sample_batched(const BanditModel& model, const BehaviorPolicy& policy, std::size_t T,
                             std::uint64_t seed);

/// Sequential generation; the propensity vector at step t may depend on
/// (t, H_t, X_t) and is logged verbatim.
LoggedDataset sample_adaptive(const BanditModel& model, const BehaviorPolicy& policy, std::size_t T,
                              std::uint64_t seed);

/// CSV with header t,context,action,reward,p_1,...,p_K (0-based context and
/// action indices, 17 significant digits).
void write_csv(std::ostream& out, const LoggedDataset& data);

/// Reads the CSV form. The regime is taken from `regime` when given, else
/// inferred: batched when every context always shows the same propensity row.
LoggedDataset read_dataset_csv(std::istream& in, std::optional<Regime> regime = std::nullopt);

std::string to_json_string(const LoggedDataset& data);
LoggedDataset dataset_from_json_string(const std::string& text);

}  // namespace offpol
