#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offpol/bandit.hpp"
#include "offpol/dataset.hpp"
#include "offpol/policy_class.hpp"

namespace offpol {

/// Value of an infeasible policy (zero propensity at pi(X_t) for some t).
/// Orders below every finite estimate and lower confidence bound.
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Plug-in reward model mu_hat used by the AIPW estimator. Values are clipped
/// to [0, 1]. A prefix-indexed model answers for record i using only records
/// 0..i-1 of the dataset it was built from.
class RewardModel {
public:
    enum class Kind { zero, empirical_mean, oracle };

    static RewardModel zero();
    static RewardModel oracle(const BanditModel& model);

    /// Per-(x, a) mean of the rewards in `train`, 0.5 for empty cells. Used
    /// for out-of-fold fitting in cross-fitting.
    static RewardModel fitted_mean(const LoggedDataset& train);

    /// Running-mean model: the prediction for record i uses records before i.
    static RewardModel prefix_mean(const LoggedDataset& data);

    /// Explicit table[x][a]; values are clipped to [0, 1].
    static RewardModel table(Kind kind, const std::vector<std::vector<double>>& values);

    Kind kind() const { return kind_; }
    bool prefix_indexed() const { return prefix_; }

    /// mu_hat_t(x, a) for the record at position `index`.
    double predict(std::size_t index, Context x, Action a) const;

private:
    Kind kind_ = Kind::zero;
    bool prefix_ = false;
    std::size_t num_actions_ = 0;
    std::vector<double> values_;  // table: x*K + a; prefix: index*K + a (at X_index)
};

std::string to_string(RewardModel::Kind kind);
RewardModel::Kind reward_kind_from_string(const std::string& name);

/// AIPW estimate (1/T) sum_t mu_hat_t + 1{A_t = pi(X_t)} / e_t * (Y_t - mu_hat_t),
/// or kNegInf when e_t(X_t, pi(X_t)) = 0 for some t.
double aipw_estimate(const LoggedDataset& data, std::span<const Action> policy,
                     const RewardModel& reward_model);

struct DeviationTerms {
    double v_s = 0.0;  // sample deviation
    double v_p = 0.0;  // population deviation
    double v_h = 0.0;  // higher-order deviation

    double max() const { return std::max({v_s, v_p, v_h}); }
};

/// V_s, V_p, V_h of a policy on the data. Throws InvalidArgument if any
/// e_t(X_t, pi(X_t)) is zero.
DeviationTerms deviation_terms(const LoggedDataset& data, std::span<const Action> policy);

/// Same sums restricted to `indices` and multiplied by `scale` instead of 1/T
/// (cross-fitting uses 2/T on each fold).
DeviationTerms deviation_terms(const LoggedDataset& data, std::span<const Action> policy,
                               std::span<const std::size_t> indices, double scale);

/// Smallest admissible radius scale for i.i.d. data:
/// 10 * sqrt(2 (ndim ln(T K^2) + ln(16 / delta))).
double beta_batched(std::size_t ndim, std::size_t T, std::size_t K, double delta);

/// Smallest admissible radius scale for adaptive data:
/// 67 (ln T)^(alpha/2) sqrt(ndim ln(T K^2) + ln(16 / delta)).
double beta_adaptive(std::size_t ndim, std::size_t T, std::size_t K, double delta, double alpha);

/// Scale for the two-fold cross-fitted estimator:
/// 10 * sqrt(2 (ndim ln(T K^2 / 2) + ln(4 / delta))).
double beta_crossfit(std::size_t ndim, std::size_t T, std::size_t K, double delta);

/// Smallest alpha >= 1 with ln e >= -(ln T)^alpha for every logged propensity
/// entry (zero entries are ignored). Requires T >= 3 so that ln ln T > 0.
double minimal_alpha(const LoggedDataset& data);

/// Diagnostic radius beta_bar * v * |ln v| used when no deterministic floor on
/// the propensities is assumed. The sign of the logarithm is not pinned down
/// for v < 1; the absolute value is an interpretation.
double unfloored_radius(double beta_bar, double v);

struct FoldTerms {
    double q_hat = 0.0;
    DeviationTerms terms;
    double radius = 0.0;
};

struct ValueRow {
    PolicyId policy_id = 0;
    double q_hat = 0.0;
    double v_s = 0.0;
    double v_p = 0.0;
    double v_h = 0.0;
    double v = 0.0;
    double radius = 0.0;
    double lcb = 0.0;
    std::optional<std::string> error;
    std::optional<std::array<FoldTerms, 2>> folds;  // cross-fitted reports only

    bool feasible() const { return !error && q_hat != kNegInf; }
};

struct ValueReport {
    std::vector<ValueRow> rows;  // policy-id order
    double beta = 0.0;
    Regime regime = Regime::batched;
    std::vector<std::string> warnings;

    const ValueRow* find(PolicyId id) const;
};

/// Per-policy (q_hat, V terms, radius = beta * V, lcb = q_hat - radius). A
/// policy whose estimate fails gets an error entry instead of aborting.
ValueReport value_report(const LoggedDataset& data, const PolicyClass& policies,
                         const RewardModel& reward_model, double beta);

/// Fits a reward model from the records it is handed. Cross-fitting hands it
/// only the out-of-fold records.
using RewardFitter = std::function<RewardModel(const LoggedDataset& train)>;

/// Two-fold cross-fitted report for batched data. An odd final record is
/// dropped with a warning. q_hat and radius are fold averages; v_s, v_p, v_h
/// and v are fold averages as well, so radius = beta * v still holds.
ValueReport crossfit_report(const LoggedDataset& data, const PolicyClass& policies,
                            const RewardFitter& fitter, double beta, std::uint64_t seed);

/// The random fold split used by crossfit_report: two sorted index lists of
/// size floor(T/2) each.
std::array<std::vector<std::size_t>, 2> crossfit_folds(std::size_t T, std::uint64_t seed);

void write_csv(std::ostream& out, const ValueReport& report);
ValueReport read_report_csv(std::istream& in);
std::string to_json_string(const ValueReport& report);
ValueReport report_from_json_string(const std::string& text);

}  // namespace offpol
