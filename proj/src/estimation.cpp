#include "offpol/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "offpol/error.hpp"
#include "offpol/numeric.hpp"
#include "offpol/rng.hpp"

namespace offpol {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kCrossfitStream = 0x63726f7373666974ULL;

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_policy_covers(const LoggedDataset& data, std::span<const Action> policy) {
    if (policy.size() < data.num_contexts())
        throw InvalidArgument("policy map is undefined on some context in the data");
    for (std::size_t x = 0; x < data.num_contexts(); ++x)
        if (policy[x] >= data.num_actions())
            throw InvalidArgument("no propensity entry for action " + std::to_string(policy[x]) +
                                  " chosen at context " + std::to_string(x));
}

void check_beta_args(std::size_t T, std::size_t K, double delta) {
    if (T < 1) throw InvalidArgument("beta needs T >= 1");
    if (K < 2) throw InvalidArgument("beta needs K >= 2");
    // delta >= 1 is meaningless as a confidence level but the formula stays defined
    if (!(delta > 0.0)) throw InvalidArgument("beta needs delta > 0");
}

double complexity_term(std::size_t ndim, double tk2, double confidence) {
    const double term = static_cast<double>(ndim) * std::log(tk2) + std::log(confidence);
    if (term < 0.0) throw InvalidArgument("beta schedule radicand is negative for this delta");
    return term;
}

json number_to_json(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

double number_from_json(const json& j) {
    if (j.is_string()) return parse_double(j.get<std::string>());
    return j.get<double>();
}

}  // namespace

std::string to_string(RewardModel::Kind kind) {
    switch (kind) {
        case RewardModel::Kind::zero: return "zero";
        case RewardModel::Kind::empirical_mean: return "empirical-mean";
        case RewardModel::Kind::oracle: return "oracle";
    }
    return "unknown";
}

RewardModel::Kind reward_kind_from_string(const std::string& name) {
    if (name == "zero") return RewardModel::Kind::zero;
    if (name == "empirical-mean") return RewardModel::Kind::empirical_mean;
    if (name == "oracle") return RewardModel::Kind::oracle;
    throw InvalidArgument("unknown reward model '" + name + "'");
}

RewardModel RewardModel::zero() { return RewardModel{}; }

RewardModel RewardModel::oracle(const BanditModel& model) {
    std::vector<std::vector<double>> values(model.num_contexts(), std::vector<double>(model.num_actions()));
    for (Context x = 0; x < model.num_contexts(); ++x)
        for (Action a = 0; a < model.num_actions(); ++a) values[x][a] = model.mean(x, a);
    return table(Kind::oracle, values);
}

RewardModel RewardModel::fitted_mean(const LoggedDataset& train) {
    const std::size_t k = train.num_actions();
    std::vector<double> sums(train.num_contexts() * k, 0.0);
    std::vector<std::size_t> counts(train.num_contexts() * k, 0);
    for (const LogRecord& r : train.records()) {
        sums[r.context * k + r.action] += r.reward;
        ++counts[r.context * k + r.action];
    }
    RewardModel m;
    m.kind_ = Kind::empirical_mean;
    m.num_actions_ = k;
    m.values_.resize(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i)
        m.values_[i] = counts[i] == 0 ? 0.5 : clip01(sums[i] / static_cast<double>(counts[i]));
    return m;
}

RewardModel RewardModel::prefix_mean(const LoggedDataset& data) {
    const std::size_t k = data.num_actions();
    std::vector<double> sums(data.num_contexts() * k, 0.0);
    std::vector<std::size_t> counts(data.num_contexts() * k, 0);
    RewardModel m;
    m.kind_ = Kind::empirical_mean;
    m.prefix_ = true;
    m.num_actions_ = k;
    m.values_.resize(data.size() * k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const LogRecord& r = data.record(i);
        for (Action a = 0; a < k; ++a) {
            const std::size_t cell = r.context * k + a;
            m.values_[i * k + a] =
                counts[cell] == 0 ? 0.5 : clip01(sums[cell] / static_cast<double>(counts[cell]));
        }
        sums[r.context * k + r.action] += r.reward;
        ++counts[r.context * k + r.action];
    }
    return m;
}

RewardModel RewardModel::table(Kind kind, const std::vector<std::vector<double>>& values) {
    RewardModel m;
    m.kind_ = kind;
    m.num_actions_ = values.empty() ? 0 : values.front().size();
    for (const auto& row : values) {
        if (row.size() != m.num_actions_) throw InvalidArgument("ragged reward-model table");
        for (double v : row) m.values_.push_back(clip01(v));
    }
    return m;
}

double RewardModel::predict(std::size_t index, Context x, Action a) const {
    if (kind_ == Kind::zero && values_.empty()) return 0.0;
    if (prefix_) return values_.at(index * num_actions_ + a);
    return values_.at(x * num_actions_ + a);
}

double aipw_estimate(const LoggedDataset& data, std::span<const Action> policy,
                     const RewardModel& reward_model) {
    if (data.empty()) throw InvalidArgument("aipw_estimate on an empty dataset");
    check_policy_covers(data, policy);
    CompensatedSum sum;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const LogRecord& r = data.record(i);
        const Action target = policy[r.context];
        const double e = data.propensity(i, target);
        if (!(e > 0.0)) return kNegInf;
        const double mu = reward_model.predict(i, r.context, target);
        double gamma = mu;
        if (r.action == target) gamma += (r.reward - mu) / e;
        sum.add(gamma);
    }
    return sum.value() / static_cast<double>(data.size());
}

DeviationTerms deviation_terms(const LoggedDataset& data, std::span<const Action> policy,
                               std::span<const std::size_t> indices, double scale) {
    check_policy_covers(data, policy);
    CompensatedSum matched_sq, inverse, inverse_cubed;
    for (std::size_t i : indices) {
        const LogRecord& r = data.record(i);
        const Action target = policy[r.context];
        const double e = data.propensity(i, target);
        if (!(e > 0.0))
            throw InvalidArgument("zero propensity at pi(X_t) for t=" + std::to_string(r.t));
        const double inv = 1.0 / e;
        if (r.action == target) matched_sq.add(inv * inv);
        inverse.add(inv);
        inverse_cubed.add(inv * inv * inv);
    }
    return DeviationTerms{scale * std::sqrt(matched_sq.value()), scale * std::sqrt(inverse.value()),
                          scale * std::pow(inverse_cubed.value(), 0.25)};
}

DeviationTerms deviation_terms(const LoggedDataset& data, std::span<const Action> policy) {
    if (data.empty()) throw InvalidArgument("deviation_terms on an empty dataset");
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return deviation_terms(data, policy, all, 1.0 / static_cast<double>(data.size()));
}

double beta_batched(std::size_t ndim, std::size_t T, std::size_t K, double delta) {
    check_beta_args(T, K, delta);
    const double tk2 = static_cast<double>(T) * static_cast<double>(K) * static_cast<double>(K);
    return 10.0 * std::sqrt(2.0 * complexity_term(ndim, tk2, 16.0 / delta));
}

double beta_adaptive(std::size_t ndim, std::size_t T, std::size_t K, double delta, double alpha) {
    check_beta_args(T, K, delta);
    if (T < 2) throw InvalidArgument("beta_adaptive needs T >= 2");
    if (!(alpha >= 1.0)) throw InvalidArgument("beta_adaptive needs alpha >= 1");
    const double tk2 = static_cast<double>(T) * static_cast<double>(K) * static_cast<double>(K);
    return 67.0 * std::pow(std::log(static_cast<double>(T)), alpha / 2.0) *
           std::sqrt(complexity_term(ndim, tk2, 16.0 / delta));
}

double beta_crossfit(std::size_t ndim, std::size_t T, std::size_t K, double delta) {
    check_beta_args(T, K, delta);
    if (T < 2) throw InvalidArgument("beta_crossfit needs T >= 2");
    const double tk2 = static_cast<double>(T) * static_cast<double>(K) * static_cast<double>(K) / 2.0;
    return 10.0 * std::sqrt(2.0 * complexity_term(ndim, tk2, 4.0 / delta));
}

double minimal_alpha(const LoggedDataset& data) {
    if (data.size() < 3) throw InvalidArgument("minimal_alpha needs T >= 3");
    const double log_log_t = std::log(std::log(static_cast<double>(data.size())));
    double alpha = 1.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (double e : data.propensities(i)) {
            if (!(e > 0.0)) continue;
            const double neg_log = -std::log(e);
            if (neg_log > 1.0) alpha = std::max(alpha, std::log(neg_log) / log_log_t);
        }
    return alpha;
}

double unfloored_radius(double beta_bar, double v) {
    if (v <= 0.0) return 0.0;
    return beta_bar * v * std::abs(std::log(v));
}

const ValueRow* ValueReport::find(PolicyId id) const {
    for (const ValueRow& row : rows)
        if (row.policy_id == id) return &row;
    return nullptr;
}

namespace {

ValueRow infeasible_row(PolicyId id, std::optional<std::string> error = std::nullopt) {
    ValueRow row;
    row.policy_id = id;
    row.q_hat = kNegInf;
    row.v_s = row.v_p = row.v_h = row.v = row.radius = kInf;
    row.lcb = kNegInf;
    row.error = std::move(error);
    return row;
}

void finish_row(ValueRow& row, double beta) {
    row.radius = beta == 0.0 ? 0.0 : beta * row.v;
    row.lcb = row.q_hat - row.radius;
}

}  // namespace

ValueReport value_report(const LoggedDataset& data, const PolicyClass& policies,
                         const RewardModel& reward_model, double beta) {
    if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
    ValueReport report;
    report.beta = beta;
    report.regime = data.regime();
    report.rows.reserve(policies.size());
    for (const Policy& p : policies.policies()) {
        try {
            const double q = aipw_estimate(data, p.actions, reward_model);
            if (q == kNegInf) {
                report.rows.push_back(infeasible_row(p.id));
                continue;
            }
            const DeviationTerms d = deviation_terms(data, p.actions);
            ValueRow row;
            row.policy_id = p.id;
            row.q_hat = q;
            row.v_s = d.v_s;
            row.v_p = d.v_p;
            row.v_h = d.v_h;
            row.v = d.max();
            finish_row(row, beta);
            report.rows.push_back(std::move(row));
        } catch (const Error& e) {
            report.rows.push_back(infeasible_row(p.id, e.what()));
        }
    }
    return report;
}

std::array<std::vector<std::size_t>, 2> crossfit_folds(std::size_t T, std::uint64_t seed) {
    const std::size_t even = T - (T % 2);
    std::vector<std::size_t> order(even);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {kCrossfitStream}));
    for (std::size_t i = even; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::array<std::vector<std::size_t>, 2> folds{
        std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(even / 2)),
        std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(even / 2), order.end())};
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

ValueReport crossfit_report(const LoggedDataset& data, const PolicyClass& policies,
                            const RewardFitter& fitter, double beta, std::uint64_t seed) {
    if (data.regime() != Regime::batched)
        throw InvalidArgument("cross-fitting needs batched data, got " + to_string(data.regime()));
    if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
    if (data.size() < 2) throw InvalidArgument("cross-fitting needs at least two records");

    ValueReport report;
    report.beta = beta;
    report.regime = Regime::batched_crossfit;
    if (data.size() % 2 == 1)
        report.warnings.push_back("odd T=" + std::to_string(data.size()) +
                                  ": dropped the final record before splitting");

    const auto folds = crossfit_folds(data.size(), seed);
    const double scale = 2.0 / static_cast<double>(folds[0].size() + folds[1].size());

    // The fold-k model only ever sees the complementary fold's records.
    std::array<RewardModel, 2> models{fitter(data.subset(folds[1])), fitter(data.subset(folds[0]))};
    for (const RewardModel& m : models)
        if (m.prefix_indexed())
            throw InvalidArgument("cross-fitting needs a table reward model, not a prefix-indexed one");

    for (const Policy& p : policies.policies()) {
        try {
            check_policy_covers(data, p.actions);
            std::array<FoldTerms, 2> fold_terms{};
            bool feasible = true;
            for (std::size_t k = 0; k < 2 && feasible; ++k) {
                CompensatedSum sum;
                for (std::size_t i : folds[k]) {
                    const LogRecord& r = data.record(i);
                    const Action target = p.actions[r.context];
                    const double e = data.propensity(i, target);
                    if (!(e > 0.0)) {
                        feasible = false;
                        break;
                    }
                    const double mu = models[k].predict(i, r.context, target);
                    double gamma = mu;
                    if (r.action == target) gamma += (r.reward - mu) / e;
                    sum.add(gamma);
                }
                if (!feasible) break;
                fold_terms[k].q_hat = scale * sum.value();
                fold_terms[k].terms = deviation_terms(data, p.actions, folds[k], scale);
                fold_terms[k].radius = beta == 0.0 ? 0.0 : beta * fold_terms[k].terms.max();
            }
            if (!feasible) {
                report.rows.push_back(infeasible_row(p.id));
                continue;
            }
            ValueRow row;
            row.policy_id = p.id;
            row.q_hat = 0.5 * (fold_terms[0].q_hat + fold_terms[1].q_hat);
            row.v_s = 0.5 * (fold_terms[0].terms.v_s + fold_terms[1].terms.v_s);
            row.v_p = 0.5 * (fold_terms[0].terms.v_p + fold_terms[1].terms.v_p);
            row.v_h = 0.5 * (fold_terms[0].terms.v_h + fold_terms[1].terms.v_h);
            row.v = 0.5 * (fold_terms[0].terms.max() + fold_terms[1].terms.max());
            row.radius = 0.5 * (fold_terms[0].radius + fold_terms[1].radius);
            row.lcb = row.q_hat - row.radius;
            row.folds = fold_terms;
            report.rows.push_back(std::move(row));
        } catch (const Error& e) {
            report.rows.push_back(infeasible_row(p.id, e.what()));
        }
    }
    return report;
}

void write_csv(std::ostream& out, const ValueReport& report) {
    out << "policy_id,q_hat,v_s,v_p,v_h,v,radius,lcb\n";
    for (const ValueRow& r : report.rows) {
        out << r.policy_id << ',' << format_double(r.q_hat) << ',' << format_double(r.v_s) << ','
            << format_double(r.v_p) << ',' << format_double(r.v_h) << ',' << format_double(r.v) << ','
            << format_double(r.radius) << ',' << format_double(r.lcb) << '\n';
    }
}

ValueReport read_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty report CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "policy_id,q_hat,v_s,v_p,v_h,v,radius,lcb")
        throw ParseError("report CSV header must be policy_id,q_hat,v_s,v_p,v_h,v,radius,lcb");
    ValueReport report;
    report.beta = std::numeric_limits<double>::quiet_NaN();
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 8) throw ParseError("report CSV row needs 8 fields: " + line);
        ValueRow row;
        try {
            row.policy_id = std::stoull(f[0]);
        } catch (const std::exception&) {
            throw ParseError("bad policy_id '" + f[0] + "'");
        }
        row.q_hat = parse_double(f[1]);
        row.v_s = parse_double(f[2]);
        row.v_p = parse_double(f[3]);
        row.v_h = parse_double(f[4]);
        row.v = parse_double(f[5]);
        row.radius = parse_double(f[6]);
        row.lcb = parse_double(f[7]);
        if (std::isnan(report.beta) && std::isfinite(row.v) && row.v > 0.0 && std::isfinite(row.radius))
            report.beta = row.radius / row.v;
        report.rows.push_back(row);
    }
    if (std::isnan(report.beta)) report.beta = 0.0;
    return report;
}

std::string to_json_string(const ValueReport& report) {
    json j;
    j["beta"] = report.beta;
    j["regime"] = to_string(report.regime);
    j["warnings"] = report.warnings;
    json rows = json::array();
    for (const ValueRow& r : report.rows) {
        json row{{"policy_id", r.policy_id},       {"q_hat", number_to_json(r.q_hat)},
                 {"v_s", number_to_json(r.v_s)},     {"v_p", number_to_json(r.v_p)},
                 {"v_h", number_to_json(r.v_h)},     {"v", number_to_json(r.v)},
                 {"radius", number_to_json(r.radius)}, {"lcb", number_to_json(r.lcb)}};
        if (r.error) row["error"] = *r.error;
        if (r.folds) {
            json folds = json::array();
            for (const FoldTerms& f : *r.folds)
                folds.push_back({{"q_hat", f.q_hat},
                                 {"v_s", f.terms.v_s},
                                 {"v_p", f.terms.v_p},
                                 {"v_h", f.terms.v_h},
                                 {"radius", f.radius}});
            row["folds"] = std::move(folds);
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j.dump(2);
}

ValueReport report_from_json_string(const std::string& text) {
    try {
        const json j = json::parse(text);
        ValueReport report;
        report.beta = j.at("beta").get<double>();
        report.regime = regime_from_string(j.at("regime").get<std::string>());
        if (j.contains("warnings")) report.warnings = j.at("warnings").get<std::vector<std::string>>();
        for (const auto& r : j.at("rows")) {
            ValueRow row;
            row.policy_id = r.at("policy_id").get<PolicyId>();
            row.q_hat = number_from_json(r.at("q_hat"));
            row.v_s = number_from_json(r.at("v_s"));
            row.v_p = number_from_json(r.at("v_p"));
            row.v_h = number_from_json(r.at("v_h"));
            row.v = number_from_json(r.at("v"));
            row.radius = number_from_json(r.at("radius"));
            row.lcb = number_from_json(r.at("lcb"));
            if (r.contains("error")) row.error = r.at("error").get<std::string>();
            if (r.contains("folds")) {
                std::array<FoldTerms, 2> folds{};
                for (std::size_t k = 0; k < 2; ++k) {
                    const auto& f = r.at("folds").at(k);
                    folds[k].q_hat = f.at("q_hat").get<double>();
                    folds[k].terms = {f.at("v_s").get<double>(), f.at("v_p").get<double>(),
                                      f.at("v_h").get<double>()};
                    folds[k].radius = f.at("radius").get<double>();
                }
                row.folds = folds;
            }
            report.rows.push_back(std::move(row));
        }
        return report;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
}

}  // namespace offpol
