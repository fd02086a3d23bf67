#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace agingsim::workload {

struct Request {
    double arrival = 0.0;  // s
    std::uint64_t input_tokens = 1;
    std::uint64_t output_tokens = 1;
    std::optional<std::size_t> machine;  // pre-routed, else round-robin
};

// CPU-side tasks of one inference request, in the order a serving stack issues them.
enum class TaskType : std::uint8_t {
    FinishFlow,
    FinishRequest,
    FinishTask,
    Submit,
    SubmitChain,
    SubmitFlow,
    SubmitTask,
    AllocMemory,
    FreeMemory,
    StartIteration,
    FlowCompletion,
};

inline constexpr std::size_t kTaskTypeCount = 11;

std::string_view task_type_name(TaskType t);
std::optional<TaskType> task_type_from_name(std::string_view name);

enum class TokenSource : std::uint8_t { None, Input, Output };

struct TaskCost {
    double base = 0.0;       // s
    double per_token = 0.0;  // s/token
    TokenSource token_source = TokenSource::None;
};

struct TaskDurationModel {
    std::array<std::optional<TaskCost>, kTaskTypeCount> costs{};

    // 2 ms control tasks, 1 ms per iteration, submit adds 0.01 ms per input token.
    static TaskDurationModel defaults();

    void set(TaskType t, TaskCost c) { costs[static_cast<std::size_t>(t)] = c; }
    // Throws ConfigError if the type is missing or the cost is degenerate.
    const TaskCost& cost(TaskType t) const;
    double duration(TaskType t, const Request& req) const;
    void validate() const;
};

struct InferenceTask {
    TaskType type = TaskType::Submit;
    double start = 0.0;             // s
    double nominal_duration = 0.0;  // s at nominal frequency
    std::uint64_t request_id = 0;
};

// CSV with header `arrival_s,input_tokens,output_tokens[,machine]`.
std::vector<Request> parse_trace(std::istream& in);
void write_trace(std::ostream& out, const std::vector<Request>& requests);

// Five submit-side tasks chained from arrival, one start_iteration per output
// token spaced by `iteration_interval`, then five completion-side tasks chained
// after the last iteration.
std::vector<InferenceTask> expand_request(const Request& req, std::uint64_t request_id,
                                          const TaskDurationModel& model, double iteration_interval);

struct TokenDistribution {
    double median = 128.0;  // lognormal median
    double sigma = 1.0;     // lognormal shape
    std::uint64_t max = 2048;
};

struct SyntheticTraceParams {
    double rate = 1.0;      // requests/s
    double duration = 1.0;  // s
    TokenDistribution input{1024.0, 1.0, 8192};
    TokenDistribution output{128.0, 1.0, 2048};
};

// Poisson arrivals with clipped lognormal token counts. Deterministic per seed.
std::vector<Request> generate_synthetic_trace(const SyntheticTraceParams& params, std::uint64_t seed);

}  // namespace agingsim::workload
