#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "offpol/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "offpol");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    const int code = offpol::cli_main(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return {code, out.str(), err.str()};
}

std::string config(const std::string& name) { return std::string(OFFPOL_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("offpol_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("ndim subcommand") {
    const Outcome o = run({"ndim", "--class", config("class_all_maps_2.json")});
    CHECK(o.code == 0);
    CHECK(o.out == "2\n");
    const Outcome w = run({"ndim", "--class", config("class_all_maps_2.json"), "--witness"});
    CHECK(nlohmann::json::parse(w.out).at("witness").at("realizing").size() == 4);
}

TEST_CASE("simulate, report with zero multiplier, learn") {
    const fs::path dir = scratch("learn");
    const std::string data = (dir / "data.csv").string();
    const std::string rep = (dir / "report.csv").string();
    CHECK(run({"simulate", "--instance", config("instance_underexplored.json"), "--T", "500", "--seed", "3",
               "--out", data})
              .code == 0);
    CHECK(run({"report", "--data", data, "--class", config("class_underexplored.json"), "--beta-mult", "0",
               "--out", rep})
              .code == 0);
    const Outcome l = run({"learn", "--report", rep});
    REQUIRE(l.code == 0);
    const auto j = nlohmann::json::parse(l.out);
    CHECK(j.at("pessimistic") == j.at("greedy"));

    const std::string rep2 = (dir / "report.json").string();
    CHECK(run({"report", "--data", data, "--class", config("class_underexplored.json"), "--format", "json",
               "--out", rep2})
              .code == 0);
    const Outcome c = run({"learn", "--report", rep2, "--instance", config("instance_underexplored.json")});
    REQUIRE(c.code == 0);
    const auto cj = nlohmann::json::parse(c.out);
    CHECK(cj.at("certificate").at("certificate_ok") == true);
    fs::remove_all(dir);
}

TEST_CASE("simulate json and adaptive instance") {
    const Outcome o = run({"simulate", "--instance", config("thompson_instance.json"), "--T", "30", "--format", "json"});
    REQUIRE(o.code == 0);
    CHECK(nlohmann::json::parse(o.out).at("regime") == "adaptive");
}

TEST_CASE("sweep writes csv and json; diagnose reads them back") {
    const fs::path dir = scratch("sweep");
    const Outcome o = run({"sweep", "--config", config("demo_sweep.json"), "--out", dir.string()});
    REQUIRE(o.code == 0);
    CHECK(fs::exists(dir / "runs.csv"));
    CHECK(fs::exists(dir / "aggregates.json"));
    CHECK(fs::exists(dir / "meta.json"));
    const Outcome d = run({"diagnose", "--runs", (dir / "runs.csv").string()});
    REQUIRE(d.code == 0);
    const auto j = nlohmann::json::parse(d.out);
    CHECK(j.at("coverage").size() == 3);
    CHECK(j.contains("slope"));
    fs::remove_all(dir);
}

TEST_CASE("errors are machine readable") {
    const Outcome u = run({"frobnicate"});
    CHECK(u.code != 0);
    CHECK(nlohmann::json::parse(u.err).at("error") == "usage");

    const Outcome f = run({"ndim", "--class", config("class_all_maps_2.json"), "--bogus"});
    CHECK(f.code != 0);

    const fs::path dir = scratch("bad");
    std::ofstream(dir / "bad.json") << "{ not json";
    const Outcome p = run({"ndim", "--class", (dir / "bad.json").string()});
    CHECK(p.code == 1);
    CHECK(nlohmann::json::parse(p.err).at("error") == "parse_error");
    fs::remove_all(dir);
}
