#include "offpol/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "offpol/error.hpp"
#include "offpol/learners.hpp"
#include "offpol/rng.hpp"

namespace offpol {

using nlohmann::json;

namespace {

const char* const kRunsHeader =
    "T,replication,seed,learner,chosen_policy,subopt,radius_at_opt,event_held,bound_2R,certificate_ok,error";

json number_to_json(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

json optional_number(const std::optional<double>& v) { return v ? number_to_json(*v) : json(nullptr); }

// Everything a replication needs at one horizon; shared read-only by workers.
struct PreparedPoint {
    std::size_t T = 0;
    double beta = 0.0;
    std::optional<BanditModel> model;
    std::optional<BehaviorPolicy> behavior;
    std::optional<PolicyClass> policies;
    double best_value = 0.0;
};

std::size_t resolve_ndim(const ExperimentConfig& config) {
    if (const auto* h = std::get_if<HardFamily>(&config.instance)) return h->d;
    const auto& inl = std::get<InlineInstance>(config.instance);
    if (config.ndim) return *config.ndim;
    if (inl.policies.declared_ndim()) return *inl.policies.declared_ndim();
    return natarajan_dimension(inl.policies);
}

double regime_beta(const ExperimentConfig& config, std::size_t ndim, std::size_t T, std::size_t K) {
    if (config.beta_override) return *config.beta_override;
    switch (config.regime) {
        case Regime::batched: return config.beta_multiplier * beta_batched(ndim, T, K, config.delta);
        case Regime::adaptive:
            return config.beta_multiplier * beta_adaptive(ndim, T, K, config.delta, config.alpha);
        case Regime::batched_crossfit: return config.beta_multiplier * beta_crossfit(ndim, T, K, config.delta);
    }
    return 0.0;
}

double median_of(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

std::optional<double> predicted_slope(const ExperimentConfig& config) {
    const auto* h = std::get_if<HardFamily>(&config.instance);
    if (h == nullptr || config.T_grid.size() < 2 || config.T_grid.front() < 2) return std::nullopt;
    double exponent = -0.5;
    if (const auto* a = std::get_if<DecayingOverlap>(&h->overlap)) exponent = -(1.0 - a->gamma) / 2.0;
    const double kk = static_cast<double>(h->K) * static_cast<double>(h->K);
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t T : config.T_grid) {
        const double t = static_cast<double>(T);
        double log_rate = exponent * std::log(t) + 0.5 * std::log(std::log(t * kk));
        if (config.regime == Regime::adaptive) log_rate += 0.5 * config.alpha * std::log(std::log(t));
        xs.push_back(std::log(t));
        ys.push_back(log_rate);
    }
    return least_squares(xs, ys).slope;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ParseError("expected true/false, got '" + s + "'");
}

template <typename T>
T parse_unsigned(const std::string& s) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw ParseError("bad integer '" + s + "'");
        return static_cast<T>(v);
    } catch (const std::logic_error&) {
        throw ParseError("bad integer '" + s + "'");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    if (T_grid.empty()) throw InvalidArgument("T_grid must not be empty");
    for (std::size_t i = 0; i < T_grid.size(); ++i) {
        if (T_grid[i] < 1) throw InvalidArgument("horizons must be >= 1");
        if (i > 0 && T_grid[i] <= T_grid[i - 1]) throw InvalidArgument("T_grid must be strictly increasing");
    }
    if (replications < 1) throw InvalidArgument("replications must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    if (!beta_override && !(beta_multiplier >= 1.0))
        throw InvalidArgument("beta_multiplier must be >= 1 (use beta_override for other scales)");
    if (beta_override && !(*beta_override >= 0.0)) throw InvalidArgument("beta_override must be >= 0");
    if (!(alpha >= 1.0)) throw InvalidArgument("alpha must be >= 1");
    if (workers < 1) throw InvalidArgument("workers must be >= 1");
    if (regime != Regime::adaptive) {
        const bool fixed = std::visit(
            [](const auto& inst) {
                using I = std::decay_t<decltype(inst)>;
                if constexpr (std::is_same_v<I, HardFamily>)
                    return !inst.adaptive();
                else
                    return inst.behavior.is_fixed_table();
            },
            instance);
        if (!fixed) throw InvalidArgument("batched regimes need a fixed-table behavior policy");
    }
}

ExperimentConfig experiment_from_json(const json& j) {
    try {
        ExperimentConfig c;
        c.instance = instance_from_json(j.at("instance"));
        c.regime = regime_from_string(j.value("regime", std::string("batched")));
        c.T_grid = j.at("T_grid").get<std::vector<std::size_t>>();
        c.replications = j.value("replications", std::size_t{1});
        c.delta = j.value("delta", 0.1);
        c.beta_multiplier = j.value("beta_multiplier", 1.0);
        if (j.contains("beta_override") && !j.at("beta_override").is_null())
            c.beta_override = j.at("beta_override").get<double>();
        c.alpha = j.value("alpha", 2.0);
        c.reward_model = reward_kind_from_string(j.value("reward_model", std::string("zero")));
        c.base_seed = j.value("base_seed", std::uint64_t{0});
        c.workers = j.value("workers", std::size_t{1});
        if (j.contains("ndim") && !j.at("ndim").is_null()) c.ndim = j.at("ndim").get<std::size_t>();
        if (j.contains("outputs")) {
            const json& o = j.at("outputs");
            c.outputs.dir = o.value("dir", std::string());
            if (o.contains("formats")) {
                const auto formats = o.at("formats").get<std::vector<std::string>>();
                c.outputs.csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
                c.outputs.json = std::find(formats.begin(), formats.end(), "json") != formats.end();
                for (const auto& f : formats)
                    if (f != "csv" && f != "json") throw InvalidArgument("unknown output format '" + f + "'");
            }
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("experiment config: ") + e.what());
    }
}

json to_json(const ExperimentConfig& c) {
    json formats = json::array();
    if (c.outputs.csv) formats.push_back("csv");
    if (c.outputs.json) formats.push_back("json");
    return json{{"instance", to_json(c.instance)},
                {"regime", to_string(c.regime)},
                {"T_grid", c.T_grid},
                {"replications", c.replications},
                {"delta", c.delta},
                {"beta_multiplier", c.beta_multiplier},
                {"beta_override", optional_number(c.beta_override)},
                {"alpha", c.alpha},
                {"reward_model", to_string(c.reward_model)},
                {"base_seed", c.base_seed},
                {"workers", c.workers},
                {"ndim", c.ndim ? json(*c.ndim) : json(nullptr)},
                {"outputs", json{{"dir", c.outputs.dir}, {"formats", formats}}}};
}

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    RunResult result;
    result.ndim = resolve_ndim(config);
    result.predicted_slope = predicted_slope(config);

    std::vector<PreparedPoint> points;
    for (std::size_t T : config.T_grid) {
        PreparedPoint p;
        p.T = T;
        GridPoint info;
        info.T = T;
        if (const auto* h = std::get_if<HardFamily>(&config.instance)) {
            const HardInstanceSpec spec = h->at(T);
            HardInstance inst = build_instance(spec);
            p.model = std::move(inst.model);
            p.behavior = std::move(inst.behavior);
            p.policies = std::move(inst.policies);
            info.delta_gap = spec.delta_gap;
            try {
                info.minimax_floor = minimax_floor(h->d, T, h->overlap);
            } catch (const InvalidArgument&) {
                // precondition fails at this horizon; the floor is simply not reported
            }
        } else {
            const auto& inl = std::get<InlineInstance>(config.instance);
            p.model = inl.model;
            p.behavior = inl.behavior;
            p.policies = inl.policies;
        }
        p.beta = regime_beta(config, result.ndim, T, p.model->num_actions());
        info.beta = p.beta;
        if (p.policies->empty()) throw InvalidArgument("policy class is empty");
        p.best_value = kNegInf;
        for (const Policy& pol : p.policies->policies())
            p.best_value = std::max(p.best_value, policy_value(*p.model, pol.actions));
        points.push_back(std::move(p));
        result.grid.push_back(info);
    }

    const std::size_t reps = config.replications;
    const std::size_t jobs = points.size() * reps;
    std::vector<std::array<RunRow, 2>> slots(jobs);

    auto run_one = [&](std::size_t job) {
        const std::size_t g = job / reps;
        const std::size_t r = job % reps;
        const PreparedPoint& p = points[g];
        const std::uint64_t seed = derive_seed(config.base_seed, {g, r});
        const LoggedDataset data = config.regime == Regime::adaptive
                                       ? sample_adaptive(*p.model, *p.behavior, p.T, seed)
                                       : sample_batched(*p.model, *p.behavior, p.T, seed);
        ValueReport report;
        if (config.regime == Regime::batched_crossfit) {
            RewardFitter fitter;
            switch (config.reward_model) {
                case RewardModel::Kind::zero: fitter = [](const LoggedDataset&) { return RewardModel::zero(); }; break;
                case RewardModel::Kind::oracle: {
                    const RewardModel oracle = RewardModel::oracle(*p.model);
                    fitter = [oracle](const LoggedDataset&) { return oracle; };
                    break;
                }
                case RewardModel::Kind::empirical_mean: fitter = RewardModel::fitted_mean; break;
            }
            report = crossfit_report(data, *p.policies, fitter, p.beta, derive_seed(seed, {1}));
        } else {
            RewardModel rm = RewardModel::zero();
            if (config.reward_model == RewardModel::Kind::oracle) rm = RewardModel::oracle(*p.model);
            if (config.reward_model == RewardModel::Kind::empirical_mean) rm = RewardModel::prefix_mean(data);
            report = value_report(data, *p.policies, rm, p.beta);
        }

        const bool event = concentration_event_holds(report, *p.model, *p.policies).holds;
        const PolicyId opt = certificate_optimum(report, *p.model, *p.policies);
        const ValueRow* opt_row = report.find(opt);
        const double radius_at_opt = opt_row != nullptr ? opt_row->radius : std::numeric_limits<double>::infinity();

        auto learner_row = [&](const std::string& name, PolicyId (*select)(const ValueReport&)) {
            RunRow row;
            row.T = p.T;
            row.replication = r;
            row.seed = seed;
            row.learner = name;
            row.radius_at_opt = radius_at_opt;
            row.bound_2R = 2.0 * radius_at_opt;
            row.event_held = event;
            try {
                const PolicyId id = select(report);
                row.chosen_policy = id;
                row.subopt = p.best_value - policy_value(*p.model, p.policies->at(id).actions);
            } catch (const NoFeasiblePolicy& e) {
                row.subopt = 1.0;
                row.error = e.what();
            }
            return row;
        };
        RunRow greedy = learner_row("greedy", greedy_select);
        RunRow pess = learner_row("pessimistic", pessimistic_select);
        const bool ok = !event || pess.subopt <= pess.bound_2R;
        greedy.certificate_ok = ok;
        pess.certificate_ok = ok;
        slots[job] = {std::move(greedy), std::move(pess)};
    };

    const std::size_t workers = std::min(config.workers, std::max<std::size_t>(jobs, 1));
    if (workers <= 1) {
        for (std::size_t job = 0; job < jobs; ++job) run_one(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (std::size_t job = next++; job < jobs; job = next++) {
                    try {
                        run_one(job);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = jobs;
                    }
                }
            });
        }
        for (auto& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    result.rows.reserve(2 * jobs);
    for (auto& pair : slots)
        for (auto& row : pair) result.rows.push_back(std::move(row));
    std::stable_sort(result.rows.begin(), result.rows.end(), [](const RunRow& a, const RunRow& b) {
        return std::tie(a.T, a.replication, a.learner) < std::tie(b.T, b.replication, b.learner);
    });
    return result;
}

std::vector<Aggregate> aggregate(const RunResult& result) {
    struct Acc {
        std::vector<double> pess, greedy, bounds;
        std::size_t pess_err = 0, greedy_err = 0, covered = 0, violations = 0;
    };
    std::map<std::size_t, Acc> by_t;
    for (const RunRow& row : result.rows) {
        Acc& acc = by_t[row.T];
        if (row.learner == "pessimistic") {
            acc.pess.push_back(row.subopt);
            acc.bounds.push_back(row.bound_2R);
            if (!row.error.empty()) ++acc.pess_err;
            if (row.event_held) ++acc.covered;
            if (!row.certificate_ok) ++acc.violations;
        } else if (row.learner == "greedy") {
            acc.greedy.push_back(row.subopt);
            if (!row.error.empty()) ++acc.greedy_err;
        } else {
            throw InvalidArgument("unknown learner '" + row.learner + "'");
        }
    }
    std::vector<Aggregate> out;
    for (const auto& [T, acc] : by_t) {
        Aggregate a;
        a.T = T;
        a.replications = acc.pess.size();
        a.coverage = acc.pess.empty() ? 0.0 : static_cast<double>(acc.covered) / static_cast<double>(acc.pess.size());
        a.mean_bound_2R = mean_of(acc.bounds);
        a.pessimistic = {mean_of(acc.pess), median_of(acc.pess), acc.pess_err};
        a.greedy = {mean_of(acc.greedy), median_of(acc.greedy), acc.greedy_err};
        a.certificate_violations = acc.violations;
        out.push_back(a);
    }
    return out;
}

std::vector<CoveragePoint> coverage_frequency(const RunResult& result) {
    std::vector<CoveragePoint> out;
    for (const Aggregate& a : aggregate(result)) out.push_back({a.T, a.coverage});
    return out;
}

std::string to_string(Statistic s) { return s == Statistic::mean ? "mean" : "median"; }

Statistic statistic_from_string(const std::string& name) {
    if (name == "mean") return Statistic::mean;
    if (name == "median") return Statistic::median;
    throw InvalidArgument("unknown statistic '" + name + "'");
}

SlopeFit scaling_slope(const RunResult& result, const std::string& learner, Statistic statistic) {
    if (learner != "pessimistic" && learner != "greedy") throw InvalidArgument("unknown learner '" + learner + "'");
    const auto aggs = aggregate(result);
    if (aggs.size() < 3) throw InvalidArgument("scaling_slope needs at least 3 grid points");
    SlopeFit out;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const Aggregate& a : aggs) {
        const LearnerAggregate& la = learner == "pessimistic" ? a.pessimistic : a.greedy;
        const double value = statistic == Statistic::mean ? la.mean_subopt : la.median_subopt;
        if (!(value > 0.0) || !std::isfinite(value)) {
            out.warnings.push_back("T=" + std::to_string(a.T) + ": " + to_string(statistic) +
                                   " suboptimality " + format_double(value) + " is not positive; point dropped");
            continue;
        }
        out.used_T.push_back(a.T);
        xs.push_back(std::log(static_cast<double>(a.T)));
        ys.push_back(std::log(value));
    }
    if (xs.size() < 3)
        throw InvalidArgument("scaling_slope: fewer than 3 grid points with positive " + to_string(statistic) +
                              " suboptimality");
    out.fit = least_squares(xs, ys);
    return out;
}

void write_runs_csv(std::ostream& out, const RunResult& result) {
    out << kRunsHeader << '\n';
    for (const RunRow& r : result.rows) {
        out << r.T << ',' << r.replication << ',' << r.seed << ',' << r.learner << ',';
        if (r.chosen_policy) out << *r.chosen_policy;
        out << ',' << format_double(r.subopt) << ',' << format_double(r.radius_at_opt) << ','
            << (r.event_held ? "true" : "false") << ',' << format_double(r.bound_2R) << ','
            << (r.certificate_ok ? "true" : "false") << ',' << csv_field(r.error) << '\n';
    }
}

RunResult read_runs_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("runs csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRunsHeader) throw ParseError("runs csv: unexpected header '" + line + "'");
    RunResult result;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 11) throw ParseError("runs csv line " + std::to_string(lineno) + ": expected 11 fields");
        try {
            RunRow r;
            r.T = parse_unsigned<std::size_t>(f[0]);
            r.replication = parse_unsigned<std::size_t>(f[1]);
            r.seed = parse_unsigned<std::uint64_t>(f[2]);
            r.learner = f[3];
            if (!f[4].empty()) r.chosen_policy = parse_unsigned<PolicyId>(f[4]);
            r.subopt = parse_double(f[5]);
            r.radius_at_opt = parse_double(f[6]);
            r.event_held = parse_bool(f[7]);
            r.bound_2R = parse_double(f[8]);
            r.certificate_ok = parse_bool(f[9]);
            r.error = f[10];
            result.rows.push_back(std::move(r));
        } catch (const Error& e) {
            throw ParseError("runs csv line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return result;
}

json aggregates_json(const RunResult& result) {
    const auto aggs = aggregate(result);
    json points = json::array();
    for (const Aggregate& a : aggs) {
        json p{{"T", a.T},
               {"replications", a.replications},
               {"coverage", a.coverage},
               {"mean_bound_2R", number_to_json(a.mean_bound_2R)},
               {"certificate_violations", a.certificate_violations}};
        for (const auto& [name, la] : {std::pair{"pessimistic", a.pessimistic}, std::pair{"greedy", a.greedy}})
            p[name] = json{{"mean_subopt", number_to_json(la.mean_subopt)},
                           {"median_subopt", number_to_json(la.median_subopt)},
                           {"errors", la.errors}};
        for (const GridPoint& g : result.grid) {
            if (g.T != a.T) continue;
            p["beta"] = number_to_json(g.beta);
            p["delta_gap"] = optional_number(g.delta_gap);
            p["minimax_floor"] = optional_number(g.minimax_floor);
        }
        points.push_back(std::move(p));
    }
    json slopes = json::object();
    for (const char* learner : {"pessimistic", "greedy"}) {
        for (Statistic s : {Statistic::mean, Statistic::median}) {
            json entry;
            try {
                const SlopeFit fit = scaling_slope(result, learner, s);
                entry = json{{"slope", fit.fit.slope},
                             {"intercept", fit.fit.intercept},
                             {"r_squared", fit.fit.r_squared},
                             {"used_T", fit.used_T},
                             {"warnings", fit.warnings}};
            } catch (const InvalidArgument& e) {
                entry = json{{"error", e.what()}};
            }
            slopes[learner][to_string(s)] = std::move(entry);
        }
    }
    return json{{"points", points},
                {"slopes", slopes},
                {"slope_statistic_default", "mean"},
                {"predicted_log_corrected_slope", optional_number(result.predicted_slope)},
                {"ndim", result.ndim}};
}

json meta_json(const ExperimentConfig& config, const RunResult& result) {
    json seeds = json::array();
    for (std::size_t g = 0; g < config.T_grid.size(); ++g)
        for (std::size_t r = 0; r < config.replications; ++r)
            seeds.push_back(json{{"grid_index", g},
                                 {"T", config.T_grid[g]},
                                 {"replication", r},
                                 {"seed", derive_seed(config.base_seed, {g, r})}});
    return json{{"version", kVersion},
                {"config", to_json(config)},
                {"ndim", result.ndim},
                {"slope_statistic_default", "mean"},
                {"seeds", seeds}};
}

void write_outputs(const ExperimentConfig& config, const RunResult& result) {
    if (config.outputs.dir.empty()) return;
    const std::filesystem::path dir(config.outputs.dir);
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw InvalidArgument("cannot write '" + (dir / name).string() + "'");
        return out;
    };
    if (config.outputs.csv) {
        auto out = open("runs.csv");
        write_runs_csv(out, result);
    }
    if (config.outputs.json) {
        auto agg = open("aggregates.json");
        agg << aggregates_json(result).dump(2) << '\n';
        auto meta = open("meta.json");
        meta << meta_json(config, result).dump(2) << '\n';
    }
}

}  // namespace offpol
