#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "agingsim/config.hpp"
#include "agingsim/errors.hpp"
#include "agingsim/experiment.hpp"
#include "agingsim/workload.hpp"

namespace fs = std::filesystem;
using namespace agingsim;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

int cmd_calibrate(const fs::path& config_path, std::optional<fs::path> out) {
    const auto cfg = config::load_config(config_path);
    const auto result = experiment::calibrate(cfg);
    const fs::path path = out ? *out : cfg.output_dir / "calibrated_params.json";
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << experiment::calibration_json(cfg, result).dump(2) << '\n';
    std::cout << "k_fit " << result.params.k_fit << "\nverified drop " << result.verified_drop
              << " (relative error " << result.relative_error << ")\nwrote " << path.string() << '\n';
    return kOk;
}

int cmd_gen_trace(const fs::path& config_path, double rate, std::uint64_t seed, const fs::path& out) {
    const auto cfg = config::load_config(config_path);
    if (!(rate > 0.0)) throw ConfigError("--rate must be positive");
    const auto trace = experiment::synthetic_trace(cfg, rate, seed);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out.string());
    workload::write_trace(f, trace);
    std::cout << trace.size() << " requests -> " << out.string() << '\n';
    return kOk;
}

int cmd_simulate(const fs::path& config_path, std::optional<fs::path> params, std::optional<fs::path> out,
                 std::size_t parallel, std::uint64_t seed_offset) {
    auto cfg = experiment::with_calibration(config::load_config(config_path), params);
    const fs::path dir = out ? *out : cfg.output_dir;
    const auto dirs = experiment::simulate(cfg, dir, parallel, seed_offset);
    std::cout << dirs.size() << " runs -> " << dir.string() << '\n';
    return kOk;
}

int cmd_report(const fs::path& runs, const fs::path& out) {
    const auto summary = experiment::report(runs, out);
    std::cout << "report (" << summary.at("runs").get<std::size_t>() << " runs) -> " << out.string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NBTI aging simulator for LLM inference clusters"};
    app.require_subcommand(1);

    fs::path config_path;
    std::optional<fs::path> out_opt, params;
    fs::path out_path, runs_dir;
    double rate = 0.0;
    std::uint64_t seed = 1, seed_offset = 0;
    std::size_t parallel = std::max(1u, std::thread::hardware_concurrency());

    auto* calibrate = app.add_subcommand("calibrate", "Fit k_fit to the lifetime anchor");
    calibrate->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--out", out_opt, "Output params file");

    auto* gen = app.add_subcommand("gen-trace", "Write a synthetic request trace");
    gen->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    gen->add_option("--rate", rate, "Mean arrival rate, requests/s")->required();
    gen->add_option("--seed", seed, "Trace seed");
    gen->add_option("--out", out_path, "Output CSV")->required();

    auto* sim = app.add_subcommand("simulate", "Run the experiment matrix");
    sim->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    sim->add_option("--params", params, "Calibrated params file")->check(CLI::ExistingFile);
    sim->add_option("--out", out_opt, "Artifacts directory (default: output_dir)");
    sim->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    sim->add_option("--seed-offset", seed_offset, "Added to every matrix seed");

    auto* rep = app.add_subcommand("report", "Aggregate runs into metric tables");
    rep->add_option("--runs", runs_dir, "Artifacts directory")->required();
    rep->add_option("--out", out_path, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (*calibrate) return cmd_calibrate(config_path, out_opt);
        if (*gen) return cmd_gen_trace(config_path, rate, seed, out_path);
        if (*sim) return cmd_simulate(config_path, params, out_opt, parallel, seed_offset);
        if (*rep) return cmd_report(runs_dir, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kValidation;
}
