#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "offpol/error.hpp"
#include "offpol/experiment.hpp"

using namespace offpol;
namespace fs = std::filesystem;

namespace {

ExperimentConfig hard_config(std::vector<std::size_t> grid, std::size_t reps, std::uint64_t seed = 1) {
    ExperimentConfig c;
    HardFamily h;
    h.d = 2;
    h.K = 3;
    h.v = {1, -1};
    h.overlap = FixedOverlap{0.4};
    c.instance = h;
    c.T_grid = std::move(grid);
    c.replications = reps;
    c.base_seed = seed;
    return c;
}

RunResult synthetic(const std::vector<std::size_t>& grid, double scale, double exponent) {
    RunResult r;
    for (std::size_t T : grid)
        for (const char* learner : {"greedy", "pessimistic"}) {
            RunRow row;
            row.T = T;
            row.learner = learner;
            row.subopt = scale * std::pow(static_cast<double>(T), exponent);
            r.rows.push_back(row);
        }
    return r;
}

std::string runs_csv(const RunResult& r) {
    std::ostringstream out;
    write_runs_csv(out, r);
    return out.str();
}

}  // namespace

TEST_CASE("beta override 0 makes both learners identical") {
    ExperimentConfig c = hard_config({10}, 1);
    HardFamily& h = std::get<HardFamily>(c.instance);
    h.delta_gap = 0.1;
    c.beta_override = 0.0;
    const RunResult r = run_experiment(c);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].learner == "greedy");
    CHECK(r.rows[1].learner == "pessimistic");
    CHECK(r.rows[0].chosen_policy == r.rows[1].chosen_policy);
    CHECK(r.rows[0].subopt == r.rows[1].subopt);
}

TEST_CASE("experiments are deterministic and independent of the worker count") {
    ExperimentConfig c = hard_config({200, 800}, 20, 99);
    const std::string a = runs_csv(run_experiment(c));
    const std::string b = runs_csv(run_experiment(c));
    c.workers = 3;
    const std::string d = runs_csv(run_experiment(c));
    CHECK(a == b);
    CHECK(a == d);
    c.base_seed = 100;
    CHECK(runs_csv(run_experiment(c)) != a);
}

TEST_CASE("rows carry the derived seed and satisfy the certificate invariant") {
    const ExperimentConfig c = hard_config({300, 600}, 5, 4);
    const RunResult r = run_experiment(c);
    REQUIRE(r.rows.size() == 20);
    for (const RunRow& row : r.rows) {
        const std::size_t g = row.T == 300 ? 0 : 1;
        CHECK(row.seed == derive_seed(4, {g, row.replication}));
        CHECK((!row.event_held || row.certificate_ok));
        CHECK(row.bound_2R == 2.0 * row.radius_at_opt);
    }
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        const auto& a = r.rows[i - 1];
        const auto& b = r.rows[i];
        CHECK(std::tie(a.T, a.replication, a.learner) < std::tie(b.T, b.replication, b.learner));
    }
}

TEST_CASE("mean pessimistic suboptimality decreases with T") {
    const RunResult r = run_experiment(hard_config({500, 2000, 8000}, 200, 12));
    const auto aggs = aggregate(r);
    REQUIRE(aggs.size() == 3);
    CHECK(aggs[1].pessimistic.mean_subopt <= aggs[0].pessimistic.mean_subopt);
    CHECK(aggs[2].pessimistic.mean_subopt <= aggs[1].pessimistic.mean_subopt);
}

TEST_CASE("coverage frequency") {
    ExperimentConfig huge = hard_config({200, 400}, 30, 3);
    huge.beta_override = 1e6;
    for (const auto& p : coverage_frequency(run_experiment(huge))) CHECK(p.frequency == 1.0);

    ExperimentConfig none = hard_config({200, 400}, 30, 3);
    none.beta_override = 0.0;
    for (const auto& p : coverage_frequency(run_experiment(none))) CHECK(p.frequency == 0.0);

    const RunResult r = run_experiment(hard_config({500, 2000, 8000}, 200, 21));
    for (const auto& p : coverage_frequency(r)) CHECK(p.frequency >= 0.9);
}

TEST_CASE("scaling slope on exact power laws") {
    const std::vector<std::size_t> grid{100, 400, 1600, 6400};
    const SlopeFit half = scaling_slope(synthetic(grid, 1.0, -0.5), "pessimistic", Statistic::mean);
    CHECK(half.fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(half.fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    const SlopeFit quarter = scaling_slope(synthetic(grid, 3.0, -0.25), "greedy", Statistic::median);
    CHECK(quarter.fit.slope == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(quarter.fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("scaling slope drops non-positive points") {
    RunResult r = synthetic({100, 400, 1600, 6400}, 1.0, -0.5);
    for (auto& row : r.rows)
        if (row.T == 400) row.subopt = 0.0;
    const SlopeFit fit = scaling_slope(r, "pessimistic", Statistic::mean);
    CHECK(fit.warnings.size() == 1);
    CHECK(fit.used_T == std::vector<std::size_t>{100, 1600, 6400});
    CHECK(fit.fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    for (auto& row : r.rows)
        if (row.T == 1600) row.subopt = 0.0;
    CHECK_THROWS_AS(scaling_slope(r, "pessimistic", Statistic::mean), InvalidArgument);
    CHECK_THROWS_AS(scaling_slope(synthetic({100, 400}, 1.0, -0.5), "pessimistic", Statistic::mean),
                    InvalidArgument);
}

TEST_CASE("runs csv round trip") {
    RunResult r = run_experiment(hard_config({200}, 3, 8));
    r.rows[0].error = "no feasible policy, \"quoted\"";
    r.rows[0].chosen_policy.reset();
    const std::string text = runs_csv(r);
    std::istringstream in(text);
    const RunResult back = read_runs_csv(in);
    CHECK(runs_csv(back) == text);
    CHECK(back.rows[0].error == r.rows[0].error);
    std::istringstream bad("T,replication\n1,2\n");
    CHECK_THROWS_AS(read_runs_csv(bad), ParseError);
}

TEST_CASE("config parsing and validation") {
    const auto j = nlohmann::json::parse(R"({
        "instance": {"family": "lower-adaptive", "d": 2, "K": 3, "v": [1, -1], "c_bar": 0.5, "gamma": 0.5},
        "regime": "adaptive", "T_grid": [100, 200], "replications": 4, "delta": 0.05,
        "beta_multiplier": 2, "alpha": 2, "reward_model": "empirical-mean", "base_seed": 5,
        "outputs": {"dir": "x", "formats": ["csv"]}})");
    const ExperimentConfig c = experiment_from_json(j);
    CHECK(c.regime == Regime::adaptive);
    CHECK(c.replications == 4);
    CHECK(c.outputs.csv);
    CHECK_FALSE(c.outputs.json);
    CHECK(c.reward_model == RewardModel::Kind::empirical_mean);
    CHECK(experiment_from_json(to_json(c)).T_grid == c.T_grid);

    auto bad = j;
    bad["T_grid"] = {200, 100};
    CHECK_THROWS_AS(experiment_from_json(bad), InvalidArgument);
    bad = j;
    bad["replications"] = 0;
    CHECK_THROWS_AS(experiment_from_json(bad), InvalidArgument);
    bad = j;
    bad["regime"] = "batched";
    CHECK_THROWS_AS(experiment_from_json(bad), InvalidArgument);
    bad = j;
    bad["beta_multiplier"] = 0.5;
    CHECK_THROWS_AS(experiment_from_json(bad), InvalidArgument);
    bad = j;
    bad["T_grid"] = "nope";
    CHECK_THROWS_AS(experiment_from_json(bad), ParseError);
}

TEST_CASE("every regime and reward model runs") {
    ExperimentConfig c = hard_config({100, 200}, 3, 2);
    for (Regime reg : {Regime::batched, Regime::batched_crossfit})
        for (auto kind : {RewardModel::Kind::zero, RewardModel::Kind::empirical_mean, RewardModel::Kind::oracle}) {
            c.regime = reg;
            c.reward_model = kind;
            CHECK(run_experiment(c).rows.size() == 12);
        }
    ExperimentConfig a = hard_config({100, 200}, 3, 2);
    std::get<HardFamily>(a.instance).overlap = DecayingOverlap{0.5, 0.5};
    a.regime = Regime::adaptive;
    a.reward_model = RewardModel::Kind::empirical_mean;
    const RunResult r = run_experiment(a);
    CHECK(r.rows.size() == 12);
    CHECK(r.predicted_slope.has_value());
}

TEST_CASE("outputs are written") {
    const fs::path dir = fs::temp_directory_path() / "offpol_experiment_test";
    fs::remove_all(dir);
    ExperimentConfig c = hard_config({100, 200, 400}, 4, 6);
    c.outputs.dir = dir.string();
    const RunResult r = run_experiment(c);
    write_outputs(c, r);
    CHECK(fs::exists(dir / "runs.csv"));
    CHECK(fs::exists(dir / "aggregates.json"));
    CHECK(fs::exists(dir / "meta.json"));
    std::ifstream meta(dir / "meta.json");
    const auto m = nlohmann::json::parse(meta);
    CHECK(m.at("seeds").size() == 12);
    CHECK(m.at("version") == kVersion);
    std::ifstream agg(dir / "aggregates.json");
    const auto a = nlohmann::json::parse(agg);
    CHECK(a.at("points").size() == 3);
    CHECK(a.at("points")[0].contains("minimax_floor"));
    fs::remove_all(dir);
}
