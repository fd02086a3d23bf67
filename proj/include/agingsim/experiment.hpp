#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "agingsim/config.hpp"
#include "agingsim/engine.hpp"

namespace agingsim::experiment {

// A matrix cell failed; what() names the cell.
class RunFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CalibrationResult {
    aging::AgingParams params;
    double verified_drop = 0.0;   // frequency drop after the anchor lifetime
    double relative_error = 0.0;  // vs the target drop
};

// Solves for k_fit from the anchor and re-simulates the worst case to verify.
CalibrationResult calibrate(const config::ExperimentConfig& cfg);
nlohmann::json calibration_json(const config::ExperimentConfig& cfg, const CalibrationResult& result);

// Returns cfg with calibrated aging parameters: the given k_fit, else the
// one loaded from `params_file`, else a fresh calibration.
config::ExperimentConfig with_calibration(config::ExperimentConfig cfg,
                                          const std::optional<std::filesystem::path>& params_file);

struct Cell {
    engine::PolicyKind policy = engine::PolicyKind::Proposed;
    std::optional<double> rate;  // nullopt for a trace file
    std::uint64_t seed = 0;

    std::string name() const;
};

std::vector<Cell> matrix(const config::ExperimentConfig& cfg, std::uint64_t seed_offset = 0);

// Synthetic trace for (rate, seed); the same for every policy.
std::vector<workload::Request> synthetic_trace(const config::ExperimentConfig& cfg, double rate, std::uint64_t seed);

// Loads inputs that must exist before any run starts (trace file, weights).
struct Inputs {
    std::optional<std::vector<workload::Request>> trace;
    std::vector<double> linux_weights;
};
Inputs load_inputs(const config::ExperimentConfig& cfg);

engine::SimConfig cell_config(const config::ExperimentConfig& cfg, const Inputs& inputs, const Cell& cell);
engine::RunResult run_cell(const config::ExperimentConfig& cfg, const Inputs& inputs, const Cell& cell);

// Writes run.json, cores/machine_<id>.csv and the optional logs under dir.
void write_run(const std::filesystem::path& dir, const config::ExperimentConfig& cfg, const Cell& cell,
               const engine::RunResult& result);

// Runs the whole matrix; throws RunFailure naming the first failed cell.
// Returns the cell directories in matrix order.
std::vector<std::filesystem::path> simulate(const config::ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                            std::size_t parallel = 1, std::uint64_t seed_offset = 0);

// Per-run statistics derived from the written artifacts.
struct RunMetrics {
    std::string policy;
    std::string rate;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<double> machine_cv;           // frequency CV per machine
    std::vector<double> machine_degradation;  // mean f0 - f per machine
    std::vector<double> normalized_idle;      // pooled over machines and samples
    double oversubscription = 0.0;            // task*s summed over machines
    bool has_samples = false;
};

RunMetrics load_run_metrics(const std::filesystem::path& run_dir);

// Reads every run under artifacts_dir and writes the metric CSVs and
// summary.json into out_dir. Throws ConfigError when no run is found.
nlohmann::json report(const std::filesystem::path& artifacts_dir, const std::filesystem::path& out_dir);

}  // namespace agingsim::experiment
