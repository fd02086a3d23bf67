#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "agingsim/aging.hpp"
#include "agingsim/metrics.hpp"
#include "agingsim/policy.hpp"
#include "agingsim/workload.hpp"

namespace agingsim::engine {

enum class PolicyKind : std::uint8_t { Proposed, Linux, LeastAged };

std::string_view policy_name(PolicyKind p);
std::optional<PolicyKind> policy_from_name(std::string_view name);

// What the idling pass ranks cores by. FrequencyDeficit is f_nominal - f(t),
// so process variation counts toward a core's age.
enum class AgeProxy : std::uint8_t { FrequencyDeficit, VthShift };

std::string_view age_proxy_name(AgeProxy a);
std::optional<AgeProxy> age_proxy_from_name(std::string_view name);

struct SimConfig {
    std::size_t machines = 22;
    std::size_t cores_per_machine = 40;
    PolicyKind policy = PolicyKind::Proposed;
    aging::AgingParams aging{};  // k_fit must already be calibrated
    aging::VariationSettings variation{};
    policy::ReactionParams reaction{};
    AgeProxy age_proxy = AgeProxy::FrequencyDeficit;
    std::vector<double> linux_weights;  // empty: uniform
    workload::TaskDurationModel durations = workload::TaskDurationModel::defaults();
    double iteration_interval = 0.025;  // s
    double aging_time_scale = 1.0;
    double min_duration = 0.0;          // s; idling passes continue at least this long
    bool record_events = false;
    bool record_samples = true;
    bool record_idling = false;

    void validate() const;
};

enum class EventKind : std::uint8_t { Completion = 0, IdlingPass = 1, Arrival = 2 };

std::string_view event_kind_name(EventKind k);

inline constexpr std::uint64_t kNoTask = ~std::uint64_t{0};

struct EventRecord {
    double time = 0.0;
    std::uint32_t machine = 0;
    EventKind kind = EventKind::Arrival;
    std::uint64_t task = kNoTask;
    long long core = -1;    // -1: unhoused / not applicable
    long long detail = 0;   // idling pass: signed core correction
};

using EventLog = std::vector<EventRecord>;

struct IdlingRecord {
    double t = 0.0;
    std::uint32_t machine = 0;
    policy::IdlingDecision decision;
};

struct CoreReport {
    std::size_t core_id = 0;
    double f0 = 0.0;
    double vth_shift = 0.0;
    double frequency = 0.0;  // 0 for failed cores
    bool failed = false;
    policy::IdleState idle_state = policy::IdleState::Active;
    double aging_time = 0.0;  // sum of applied interval lengths, aging seconds
    double busy_time = 0.0;   // s spent holding tasks
};

struct MachineReport {
    std::size_t machine_id = 0;
    std::vector<CoreReport> cores;
};

struct RunResult {
    EventLog events;
    std::vector<MachineReport> machines;
    std::vector<metrics::MetricSample> samples;
    std::vector<IdlingRecord> idling;
    double end_time = 0.0;
    std::uint64_t arrived_tasks = 0;
    std::uint64_t completed_tasks = 0;
};

// Deterministic in (config, trace, seed). Throws ConfigError on an invalid setup.
RunResult run_simulation(const SimConfig& config, const std::vector<workload::Request>& trace,
                         std::uint64_t seed);

// Seed of the variation grid for one machine; shared by every policy.
std::uint64_t machine_grid_seed(std::uint64_t seed, std::size_t machine);

// CSV writers: `time,machine,kind,task,core,detail`, `core_id,f0,vth_shift,frequency`,
// `t,machine,n_total,n_idle,n_running` and `t,machine,N,C_SLP,T,e,F,e_corr`.
void write_event_log_csv(std::ostream& out, const EventLog& log);
void write_core_csv(std::ostream& out, const MachineReport& machine);
void write_samples_csv(std::ostream& out, const std::vector<metrics::MetricSample>& samples);
void write_idling_csv(std::ostream& out, const std::vector<IdlingRecord>& records);

}  // namespace agingsim::engine
