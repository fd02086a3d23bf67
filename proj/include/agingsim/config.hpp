#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agingsim/engine.hpp"
#include "agingsim/metrics.hpp"
#include "agingsim/workload.hpp"

namespace agingsim::config {

inline constexpr int kSchemaVersion = 1;

struct CalibrationAnchor {
    double target_drop = 0.3;
    double lifetime_years = 10.0;
};

struct OutputOptions {
    bool event_log = true;
    bool samples = true;
    bool idling_debug = false;
};

// One JSON document that fully determines an experiment matrix.
struct ExperimentConfig {
    engine::SimConfig sim;  // sim.policy is set per matrix cell
    bool k_fit_given = false;
    CalibrationAnchor calibration;
    std::vector<engine::PolicyKind> policies{engine::PolicyKind::Proposed, engine::PolicyKind::Linux,
                                             engine::PolicyKind::LeastAged};
    std::optional<std::filesystem::path> linux_weights_csv;
    std::optional<std::filesystem::path> trace_file;
    workload::SyntheticTraceParams synthetic;  // rate comes from `rates`
    std::vector<double> rates{40.0};
    std::vector<std::uint64_t> seeds{1};
    OutputOptions outputs;
    metrics::CarbonParams carbon;
    std::filesystem::path output_dir = "runs";
};

// Throws ConfigError on unknown keys, wrong types or violated invariants.
// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical form: every field explicit, keys sorted.
nlohmann::json to_json(const ExperimentConfig& cfg);

nlohmann::json aging_to_json(const aging::AgingParams& p);
aging::AgingParams aging_from_json(const nlohmann::json& j, aging::AgingParams base = {});

// FNV-1a of the canonical dump without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace agingsim::config
