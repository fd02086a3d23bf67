#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "agingsim/config.hpp"
#include "agingsim/errors.hpp"
#include "agingsim/experiment.hpp"

using namespace agingsim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("agingsim_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json tiny() {
    return json::parse(R"({
        "schema_version": 1,
        "cluster": {"machines": 2, "cores_per_vm": 8},
        "trace": {"synthetic": {"duration_s": 2}},
        "rates": [3],
        "seeds": [1, 2],
        "outputs": {"event_log": true, "samples": true, "idling_debug": true}
    })");
}

}  // namespace

TEST_CASE("defaults fill every omitted field") {
    const auto cfg = config::parse_config(json::parse(R"({"schema_version": 1})"));
    CHECK(cfg.sim.machines == 22);
    CHECK(cfg.sim.cores_per_machine == 40);
    CHECK(cfg.policies.size() == 3);
    CHECK(cfg.sim.reaction.idling_period == 1.0);
    CHECK(cfg.sim.aging_time_scale == 1.0);
    CHECK_FALSE(cfg.k_fit_given);
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 2})")), ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "bogus": 1})")), ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "cluster": {"machines": 0}})")),
                    ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "rates": []})")), ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "seeds": []})")), ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "policies": ["greedy"]})")),
                    ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "aging_time_scale": 0})")),
                    ConfigError);
    CHECK_THROWS_AS(config::parse_config(json::parse(R"({"schema_version": 1, "cluster": {"machines": "x"}})")),
                    ConfigError);
}

TEST_CASE("canonical form round-trips and hashes ignore output_dir") {
    auto cfg = config::parse_config(tiny());
    const auto again = config::parse_config(config::to_json(cfg));
    CHECK(config::to_json(again) == config::to_json(cfg));
    CHECK(config::config_hash(again) == config::config_hash(cfg));
    CHECK(config::config_hash(cfg).size() == 16);
    auto moved = cfg;
    moved.output_dir = "elsewhere";
    CHECK(config::config_hash(moved) == config::config_hash(cfg));
    moved.seeds = {9};
    CHECK(config::config_hash(moved) != config::config_hash(cfg));
}

TEST_CASE("calibration fills k_fit and verifies the anchor") {
    const auto cfg = config::parse_config(tiny());
    const auto res = experiment::calibrate(cfg);
    CHECK(res.params.k_fit > 0.0);
    CHECK(res.relative_error <= 1e-6);
    const auto doc = experiment::calibration_json(cfg, res);
    const auto dir = scratch("params");
    std::ofstream(dir / "p.json") << doc.dump();
    const auto loaded = experiment::with_calibration(cfg, dir / "p.json");
    CHECK(loaded.sim.aging.k_fit == res.params.k_fit);
    CHECK(loaded.k_fit_given);
}

TEST_CASE("matrix size and cell names") {
    auto cfg = config::parse_config(tiny());
    const auto cells = experiment::matrix(cfg, 10);
    CHECK(cells.size() == 6);
    CHECK(cells.front().seed == 11);
    CHECK(cells.front().name() == "proposed_rate3_seed11");
}

TEST_CASE("simulate writes artifacts and report aggregates them") {
    auto cfg = experiment::with_calibration(config::parse_config(tiny()), std::nullopt);
    const auto dir = scratch("sim");
    const auto runs = experiment::simulate(cfg, dir / "runs", 2);
    CHECK(runs.size() == 6);
    for (const auto& r : runs) {
        CHECK(fs::exists(r / "run.json"));
        CHECK(fs::exists(r / "cores" / "machine_000.csv"));
        CHECK(fs::exists(r / "cores" / "machine_001.csv"));
        CHECK(fs::exists(r / "samples.csv"));
        CHECK(fs::exists(r / "events.csv"));
        CHECK(fs::exists(r / "idling.csv"));
    }
    CHECK(fs::exists(dir / "runs" / "config.json"));

    const auto summary = experiment::report(dir / "runs", dir / "report");
    CHECK(summary.at("runs") == 6);
    for (const char* f : {"frequency_cv.csv", "mean_degradation.csv", "normalized_idle.csv", "oversubscription.csv",
                          "carbon.csv", "summary.json"}) {
        CHECK(fs::exists(dir / "report" / f));
    }
    std::ifstream cv(dir / "report" / "frequency_cv.csv");
    std::string header;
    std::getline(cv, header);
    CHECK(header == "rate,percentile,proposed,linux,least_aged");
    CHECK(summary["rates"]["3"]["linux"]["carbon"]["p50"]["ratio"] == 1.0);

    const auto m = experiment::load_run_metrics(runs.front());
    CHECK(m.machine_cv.size() == 2);
    CHECK(m.has_samples);
}

TEST_CASE("report on an empty directory is a config error") {
    const auto dir = scratch("empty");
    CHECK_THROWS_AS(experiment::report(dir, dir / "out"), ConfigError);
}

TEST_CASE("trace files resolve relative to the config") {
    const auto dir = scratch("trace");
    std::ofstream(dir / "t.csv") << "arrival_s,input_tokens,output_tokens\n0.1,10,2\n";
    auto doc = tiny();
    doc["trace"] = {{"file", "t.csv"}};
    std::ofstream(dir / "c.json") << doc.dump();
    const auto cfg = config::load_config(dir / "c.json");
    REQUIRE(cfg.trace_file.has_value());
    CHECK(*cfg.trace_file == dir / "t.csv");
    const auto inputs = experiment::load_inputs(cfg);
    REQUIRE(inputs.trace.has_value());
    CHECK(inputs.trace->size() == 1);
    CHECK(experiment::matrix(cfg).front().name() == "proposed_trace_seed1");
}
