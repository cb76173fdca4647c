#include "offpol/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "offpol/config.hpp"
#include "offpol/error.hpp"
#include "offpol/estimation.hpp"
#include "offpol/experiment.hpp"
#include "offpol/learners.hpp"

namespace offpol {

using nlohmann::json;

namespace {

struct Resolved {
    BanditModel model;
    BehaviorPolicy behavior;
    PolicyClass policies;
    std::optional<std::size_t> ndim;
};

Resolved resolve_instance(const std::string& path, std::optional<std::size_t> T) {
    InstanceConfig inst = instance_from_json(read_json_file(path));
    if (auto* inl = std::get_if<InlineInstance>(&inst)) {
        const auto nd = inl->policies.declared_ndim();
        return Resolved{std::move(inl->model), std::move(inl->behavior), std::move(inl->policies), nd};
    }
    const auto& h = std::get<HardFamily>(inst);
    if (!T) throw InvalidArgument("a hard-instance family needs --T");
    HardInstance hi = build_instance(h.at(*T));
    return Resolved{std::move(hi.model), std::move(hi.behavior), std::move(hi.policies), h.d};
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool looks_like_json(const std::string& text) {
    const auto pos = text.find_first_not_of(" \t\r\n");
    return pos != std::string::npos && text[pos] == '{';
}

LoggedDataset load_dataset(const std::string& path) {
    const std::string text = read_text(path);
    if (looks_like_json(text)) return dataset_from_json_string(text);
    std::istringstream in(text);
    return read_dataset_csv(in);
}

ValueReport load_report(const std::string& path) {
    const std::string text = read_text(path);
    if (looks_like_json(text)) return report_from_json_string(text);
    std::istringstream in(text);
    return read_report_csv(in);
}

// Writes to `path`, or to stdout when the path is empty.
template <typename Writer>
void emit(const std::string& path, Writer&& write) {
    if (path.empty()) {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    write(out);
}

json certificate_json(const Certificate& c) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); };
    return json{{"chosen", c.chosen},       {"optimal", c.optimal}, {"subopt", num(c.subopt)},
                {"radius_at_opt", num(c.radius_at_opt)}, {"bound_2R", num(c.bound)},
                {"event_held", c.event},    {"certificate_ok", c.ok}};
}

void print_error(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Offline policy learning with pessimistic AIPW estimates", "offpol"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // simulate
    std::string sim_instance, sim_out, sim_format = "csv", sim_regime;
    std::size_t sim_T = 0;
    std::uint64_t sim_seed = 0;
    auto* simulate = app.add_subcommand("simulate", "generate a logged dataset");
    simulate->add_option("--instance", sim_instance, "instance JSON file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--T", sim_T, "horizon")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--regime", sim_regime, "batched | adaptive (default from the behavior policy)");
    simulate->add_option("--seed", sim_seed, "dataset seed");
    simulate->add_option("--out", sim_out, "output file (stdout when omitted)");
    simulate->add_option("--format", sim_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    // report
    std::string rep_data, rep_class, rep_out, rep_format = "csv", rep_reward = "zero", rep_instance;
    std::optional<double> rep_beta;
    double rep_delta = 0.1, rep_mult = 1.0, rep_alpha = 2.0;
    std::optional<std::size_t> rep_ndim;
    bool rep_crossfit = false;
    std::uint64_t rep_seed = 0;
    auto* report = app.add_subcommand("report", "per-policy estimates, deviation terms and radii");
    report->add_option("--data", rep_data, "dataset file (csv or json)")->required()->check(CLI::ExistingFile);
    report->add_option("--class", rep_class, "policy class JSON file")->required()->check(CLI::ExistingFile);
    report->add_option("--beta", rep_beta, "absolute beta (overrides the schedule)");
    report->add_option("--delta", rep_delta, "confidence level of the beta schedule");
    report->add_option("--beta-mult", rep_mult, "multiplier on the beta schedule")->check(CLI::NonNegativeNumber);
    report->add_option("--alpha", rep_alpha, "adaptive schedule exponent");
    report->add_option("--ndim", rep_ndim, "Natarajan dimension (brute force when omitted)");
    report->add_option("--reward-model", rep_reward, "zero | empirical-mean | oracle")
        ->check(CLI::IsMember({"zero", "empirical-mean", "oracle"}));
    report->add_option("--instance", rep_instance, "instance JSON (needed for the oracle reward model)");
    report->add_flag("--crossfit", rep_crossfit, "two-fold cross-fitted estimates (batched data)");
    report->add_option("--seed", rep_seed, "fold-split seed");
    report->add_option("--out", rep_out, "output file (stdout when omitted)");
    report->add_option("--format", rep_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    // learn
    std::string learn_report, learn_instance, learn_out;
    std::optional<std::size_t> learn_T;
    auto* learn = app.add_subcommand("learn", "select policies from a report and print certificates");
    learn->add_option("--report", learn_report, "report file (csv or json)")->required()->check(CLI::ExistingFile);
    learn->add_option("--instance", learn_instance, "instance JSON; enables oracle certificates");
    learn->add_option("--T", learn_T, "horizon for hard-instance families");
    learn->add_option("--out", learn_out, "output file (stdout when omitted)");

    // sweep
    std::string sweep_config, sweep_out;
    std::optional<std::uint64_t> sweep_seed;
    std::optional<double> sweep_delta, sweep_mult;
    std::optional<std::size_t> sweep_workers;
    std::vector<std::string> sweep_formats;
    auto* sweep = app.add_subcommand("sweep", "run a replicated experiment from a config file");
    sweep->add_option("--config", sweep_config, "experiment JSON file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_out, "output directory (default: OFFPOL_OUT_DIR, then the config)");
    sweep->add_option("--seed", sweep_seed, "base seed override");
    sweep->add_option("--delta", sweep_delta, "delta override");
    sweep->add_option("--beta-mult", sweep_mult, "beta multiplier override");
    sweep->add_option("--workers", sweep_workers, "worker threads");
    sweep->add_option("--format", sweep_formats, "csv and/or json")->check(CLI::IsMember({"csv", "json"}));

    // diagnose
    std::string diag_runs, diag_learner = "pessimistic", diag_stat = "mean";
    auto* diagnose = app.add_subcommand("diagnose", "coverage and scaling slope from a runs.csv file");
    diagnose->add_option("--runs", diag_runs, "runs.csv")->required()->check(CLI::ExistingFile);
    diagnose->add_option("--learner", diag_learner, "pessimistic | greedy")
        ->check(CLI::IsMember({"pessimistic", "greedy"}));
    diagnose->add_option("--statistic", diag_stat, "mean | median")->check(CLI::IsMember({"mean", "median"}));

    // ndim
    std::string ndim_class;
    bool ndim_witness = false;
    auto* ndim = app.add_subcommand("ndim", "brute-force Natarajan dimension of a class");
    ndim->add_option("--class", ndim_class, "policy class JSON file")->required()->check(CLI::ExistingFile);
    ndim->add_flag("--witness", ndim_witness, "print the shattering witness as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (*simulate) {
            const Resolved inst = resolve_instance(sim_instance, sim_T);
            Regime regime = inst.behavior.is_fixed_table() ? Regime::batched : Regime::adaptive;
            if (!sim_regime.empty()) regime = regime_from_string(sim_regime);
            const LoggedDataset data = regime == Regime::adaptive
                                           ? sample_adaptive(inst.model, inst.behavior, sim_T, sim_seed)
                                           : sample_batched(inst.model, inst.behavior, sim_T, sim_seed);
            emit(sim_out, [&](std::ostream& out) {
                if (sim_format == "json")
                    out << to_json_string(data) << '\n';
                else
                    write_csv(out, data);
            });
        } else if (*report) {
            const LoggedDataset data = load_dataset(rep_data);
            const PolicyClass policies = class_from_json(read_json_file(rep_class));
            double beta = 0.0;
            if (rep_beta) {
                beta = *rep_beta;
            } else {
                std::size_t nd = rep_ndim ? *rep_ndim
                                 : policies.declared_ndim() ? *policies.declared_ndim()
                                                            : natarajan_dimension(policies);
                const std::size_t T = data.size();
                const std::size_t K = data.num_actions();
                if (rep_crossfit)
                    beta = rep_mult * beta_crossfit(nd, T, K, rep_delta);
                else if (data.regime() == Regime::adaptive)
                    beta = rep_mult * beta_adaptive(nd, T, K, rep_delta, rep_alpha);
                else
                    beta = rep_mult * beta_batched(nd, T, K, rep_delta);
            }
            const auto kind = reward_kind_from_string(rep_reward);
            std::optional<BanditModel> model;
            if (kind == RewardModel::Kind::oracle) {
                if (rep_instance.empty()) throw InvalidArgument("the oracle reward model needs --instance");
                model = resolve_instance(rep_instance, data.size()).model;
            }
            ValueReport rep;
            if (rep_crossfit) {
                RewardFitter fitter = [&](const LoggedDataset& train) {
                    if (kind == RewardModel::Kind::empirical_mean) return RewardModel::fitted_mean(train);
                    if (kind == RewardModel::Kind::oracle) return RewardModel::oracle(*model);
                    return RewardModel::zero();
                };
                rep = crossfit_report(data, policies, fitter, beta, rep_seed);
            } else {
                RewardModel rm = RewardModel::zero();
                if (kind == RewardModel::Kind::empirical_mean) rm = RewardModel::prefix_mean(data);
                if (kind == RewardModel::Kind::oracle) rm = RewardModel::oracle(*model);
                rep = value_report(data, policies, rm, beta);
            }
            for (const auto& w : rep.warnings) std::cerr << json{{"warning", w}}.dump() << std::endl;
            emit(rep_out, [&](std::ostream& out) {
                if (rep_format == "json")
                    out << to_json_string(rep) << '\n';
                else
                    write_csv(out, rep);
            });
        } else if (*learn) {
            const ValueReport rep = load_report(learn_report);
            json out{{"beta", rep.beta}};
            try {
                out["pessimistic"] = pessimistic_select(rep);
                out["greedy"] = greedy_select(rep);
            } catch (const NoFeasiblePolicy& e) {
                out["pessimistic"] = nullptr;
                out["greedy"] = nullptr;
                out["error"] = e.what();
            }
            if (!learn_instance.empty() && !out.contains("error")) {
                const Resolved inst = resolve_instance(learn_instance, learn_T);
                out["certificate"] = certificate_json(pessimism_certificate(rep, inst.model, inst.policies));
                const PolicyId g = out["greedy"].get<PolicyId>();
                out["greedy_subopt"] = suboptimality(inst.model, inst.policies, inst.policies.at(g).actions);
            }
            emit(learn_out, [&](std::ostream& o) { o << out.dump(2) << '\n'; });
        } else if (*sweep) {
            ExperimentConfig config = experiment_from_json(read_json_file(sweep_config));
            if (!sweep_out.empty()) {
                config.outputs.dir = sweep_out;
            } else if (const char* env = std::getenv("OFFPOL_OUT_DIR"); env != nullptr && *env != '\0') {
                config.outputs.dir = env;
            } else if (config.outputs.dir.empty()) {
                config.outputs.dir = "offpol_out";
            }
            if (sweep_seed) config.base_seed = *sweep_seed;
            if (sweep_delta) config.delta = *sweep_delta;
            if (sweep_mult) config.beta_multiplier = *sweep_mult;
            if (sweep_workers) config.workers = *sweep_workers;
            if (!sweep_formats.empty()) {
                config.outputs.csv = std::find(sweep_formats.begin(), sweep_formats.end(), "csv") != sweep_formats.end();
                config.outputs.json =
                    std::find(sweep_formats.begin(), sweep_formats.end(), "json") != sweep_formats.end();
            }
            const RunResult result = run_experiment(config);
            write_outputs(config, result);
            std::cout << json{{"out_dir", config.outputs.dir}, {"rows", result.rows.size()}}.dump() << '\n';
        } else if (*diagnose) {
            std::ifstream in(diag_runs, std::ios::binary);
            const RunResult result = read_runs_csv(in);
            json out;
            json cov = json::array();
            for (const auto& c : coverage_frequency(result)) cov.push_back(json{{"T", c.T}, {"frequency", c.frequency}});
            out["coverage"] = cov;
            out["learner"] = diag_learner;
            out["statistic"] = diag_stat;
            try {
                const SlopeFit fit = scaling_slope(result, diag_learner, statistic_from_string(diag_stat));
                out["slope"] = fit.fit.slope;
                out["intercept"] = fit.fit.intercept;
                out["r_squared"] = fit.fit.r_squared;
                out["used_T"] = fit.used_T;
                out["warnings"] = fit.warnings;
            } catch (const InvalidArgument& e) {
                out["slope_error"] = e.what();
            }
            std::cout << out.dump(2) << '\n';
        } else if (*ndim) {
            const PolicyClass policies = class_from_json(read_json_file(ndim_class));
            const NatarajanResult res = natarajan_search(policies);
            if (!ndim_witness) {
                std::cout << res.dimension << '\n';
            } else {
                json out{{"dimension", res.dimension}};
                if (res.witness)
                    out["witness"] = json{{"subset", res.witness->subset},
                                          {"f1", res.witness->f1},
                                          {"f2", res.witness->f2},
                                          {"realizing", res.witness->realizing}};
                std::cout << out.dump(2) << '\n';
            }
        }
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}

}  // namespace offpol
