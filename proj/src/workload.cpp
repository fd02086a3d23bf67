#include "agingsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "agingsim/csv.hpp"
#include "agingsim/errors.hpp"

namespace agingsim::workload {

namespace {

constexpr std::array<std::string_view, kTaskTypeCount> kNames = {
    "finish_flow", "finish_request", "finish_task",     "submit",         "submit_chain",   "submit_flow",
    "submit_task", "alloc_memory",   "free_memory",     "start_iteration", "flow_completion",
};

constexpr std::array<TaskType, 5> kSubmitPhase = {
    TaskType::Submit, TaskType::SubmitChain, TaskType::SubmitFlow, TaskType::SubmitTask, TaskType::AllocMemory,
};

constexpr std::array<TaskType, 5> kCompletionPhase = {
    TaskType::FlowCompletion, TaskType::FinishTask, TaskType::FinishFlow, TaskType::FinishRequest,
    TaskType::FreeMemory,
};

const std::vector<std::string> kHeader = {"arrival_s", "input_tokens", "output_tokens"};
const std::vector<std::string> kHeaderRouted = {"arrival_s", "input_tokens", "output_tokens", "machine"};

}  // namespace

std::string_view task_type_name(TaskType t) { return kNames[static_cast<std::size_t>(t)]; }

std::optional<TaskType> task_type_from_name(std::string_view name) {
    for (std::size_t k = 0; k < kNames.size(); ++k) {
        if (kNames[k] == name) return static_cast<TaskType>(k);
    }
    return std::nullopt;
}

TaskDurationModel TaskDurationModel::defaults() {
    TaskDurationModel m;
    for (std::size_t k = 0; k < kTaskTypeCount; ++k) m.costs[k] = TaskCost{2e-3, 0.0, TokenSource::None};
    m.set(TaskType::StartIteration, {1e-3, 0.0, TokenSource::None});
    m.set(TaskType::Submit, {2e-3, 1e-5, TokenSource::Input});
    return m;
}

const TaskCost& TaskDurationModel::cost(TaskType t) const {
    const auto& c = costs[static_cast<std::size_t>(t)];
    if (!c) throw ConfigError("duration model has no entry for task type " + std::string(task_type_name(t)));
    return *c;
}

double TaskDurationModel::duration(TaskType t, const Request& req) const {
    const auto& c = cost(t);
    double tokens = 0.0;
    if (c.token_source == TokenSource::Input) tokens = static_cast<double>(req.input_tokens);
    if (c.token_source == TokenSource::Output) tokens = static_cast<double>(req.output_tokens);
    return c.base + c.per_token * tokens;
}

void TaskDurationModel::validate() const {
    for (std::size_t k = 0; k < kTaskTypeCount; ++k) {
        const auto& c = cost(static_cast<TaskType>(k));
        if (!(c.base >= 0.0 && c.per_token >= 0.0)) {
            throw ConfigError("duration model: negative cost for " + std::string(kNames[k]));
        }
        // With token_source=none the per-token term never contributes.
        const double floor = c.base + (c.token_source == TokenSource::None ? 0.0 : c.per_token);
        if (!(floor > 0.0)) throw ConfigError("duration model: zero duration for " + std::string(kNames[k]));
    }
}

std::vector<Request> parse_trace(std::istream& in) {
    std::vector<std::string> header;
    std::size_t line = 0;
    std::vector<Request> out;
    if (!csv::read_header(in, header, line)) return out;
    const bool routed = header == kHeaderRouted;
    if (!routed && header != kHeader) {
        throw ParseError(line, "expected header 'arrival_s,input_tokens,output_tokens[,machine]'");
    }
    csv::Row row;
    while (csv::next_row(in, row, line)) {
        if (row.fields.size() != header.size()) {
            throw ParseError(row.line, "expected " + std::to_string(header.size()) + " fields");
        }
        Request r;
        r.arrival = csv::to_double(row.fields[0], row.line);
        const auto in_tok = csv::to_integer(row.fields[1], row.line);
        const auto out_tok = csv::to_integer(row.fields[2], row.line);
        if (!(r.arrival >= 0.0) || !std::isfinite(r.arrival)) throw ParseError(row.line, "arrival must be >= 0");
        if (in_tok < 1 || out_tok < 1) throw ParseError(row.line, "token counts must be >= 1");
        r.input_tokens = static_cast<std::uint64_t>(in_tok);
        r.output_tokens = static_cast<std::uint64_t>(out_tok);
        if (routed && !row.fields[3].empty()) {
            const auto m = csv::to_integer(row.fields[3], row.line);
            if (m < 0) throw ParseError(row.line, "machine must be >= 0");
            r.machine = static_cast<std::size_t>(m);
        }
        out.push_back(r);
    }
    return out;
}

void write_trace(std::ostream& out, const std::vector<Request>& requests) {
    const bool routed = std::any_of(requests.begin(), requests.end(), [](const Request& r) { return r.machine; });
    out << (routed ? "arrival_s,input_tokens,output_tokens,machine\n" : "arrival_s,input_tokens,output_tokens\n");
    for (const auto& r : requests) {
        out << csv::format_double(r.arrival) << ',' << r.input_tokens << ',' << r.output_tokens;
        if (routed) {
            out << ',';
            if (r.machine) out << *r.machine;
        }
        out << '\n';
    }
}

std::vector<InferenceTask> expand_request(const Request& req, std::uint64_t request_id,
                                          const TaskDurationModel& model, double iteration_interval) {
    if (!(iteration_interval >= 0.0)) throw ConfigError("iteration interval must be >= 0");
    std::vector<InferenceTask> tasks;
    tasks.reserve(10 + req.output_tokens);

    double t = req.arrival;
    for (TaskType type : kSubmitPhase) {
        const double d = model.duration(type, req);
        tasks.push_back({type, t, d, request_id});
        t += d;
    }
    const double iter_duration = model.duration(TaskType::StartIteration, req);
    const double first_iteration = t;
    for (std::uint64_t k = 0; k < req.output_tokens; ++k) {
        tasks.push_back({TaskType::StartIteration, first_iteration + static_cast<double>(k) * iteration_interval,
                         iter_duration, request_id});
    }
    t = first_iteration + static_cast<double>(req.output_tokens) * iteration_interval;
    for (TaskType type : kCompletionPhase) {
        const double d = model.duration(type, req);
        tasks.push_back({type, t, d, request_id});
        t += d;
    }
    return tasks;
}

namespace {

std::uint64_t draw_tokens(const TokenDistribution& dist, std::mt19937_64& rng) {
    std::lognormal_distribution<double> ln(std::log(dist.median), dist.sigma);
    const double v = std::round(ln(rng));
    const double hi = static_cast<double>(std::max<std::uint64_t>(dist.max, 1));
    return static_cast<std::uint64_t>(std::clamp(v, 1.0, hi));
}

}  // namespace

std::vector<Request> generate_synthetic_trace(const SyntheticTraceParams& params, std::uint64_t seed) {
    std::vector<Request> out;
    if (!(params.duration > 0.0)) return out;
    if (!(params.rate > 0.0)) throw ConfigError("synthetic trace: rate must be > 0");
    if (!(params.input.median >= 1.0 && params.output.median >= 1.0 && params.input.sigma >= 0.0 &&
          params.output.sigma >= 0.0)) {
        throw ConfigError("synthetic trace: token medians must be >= 1 and sigmas >= 0");
    }
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(params.rate);
    double t = gap(rng);
    while (t < params.duration) {
        Request r;
        r.arrival = t;
        r.input_tokens = draw_tokens(params.input, rng);
        r.output_tokens = draw_tokens(params.output, rng);
        out.push_back(r);
        t += gap(rng);
    }
    return out;
}

}  // namespace agingsim::workload
