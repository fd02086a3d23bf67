#include "agingsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <queue>
#include <random>
#include <string>

#include "agingsim/baselines.hpp"
#include "agingsim/csv.hpp"
#include "agingsim/errors.hpp"

namespace agingsim::engine {

using policy::IdleEvent;
using policy::IdleState;
using policy::ManagedCore;

std::string_view policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::Proposed: return "proposed";
        case PolicyKind::Linux: return "linux";
        case PolicyKind::LeastAged: return "least_aged";
    }
    return "proposed";
}

std::optional<PolicyKind> policy_from_name(std::string_view name) {
    if (name == "proposed") return PolicyKind::Proposed;
    if (name == "linux") return PolicyKind::Linux;
    if (name == "least_aged" || name == "least-aged") return PolicyKind::LeastAged;
    return std::nullopt;
}

std::string_view age_proxy_name(AgeProxy a) {
    return a == AgeProxy::FrequencyDeficit ? "frequency_deficit" : "vth_shift";
}

std::optional<AgeProxy> age_proxy_from_name(std::string_view name) {
    if (name == "frequency_deficit") return AgeProxy::FrequencyDeficit;
    if (name == "vth_shift") return AgeProxy::VthShift;
    return std::nullopt;
}

std::string_view event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::Completion: return "completion";
        case EventKind::IdlingPass: return "idling_pass";
        case EventKind::Arrival: return "arrival";
    }
    return "arrival";
}

void SimConfig::validate() const {
    if (machines < 1) throw ConfigError("cluster needs at least one machine");
    if (cores_per_machine < 1) throw ConfigError("machines need at least one core");
    aging.validate();
    if (!(aging.k_fit > 0.0)) throw ConfigError("aging parameters are not calibrated (k_fit <= 0)");
    variation.validate();
    reaction.validate();
    durations.validate();
    if (!(iteration_interval >= 0.0)) throw ConfigError("iteration_interval must be >= 0");
    if (!(aging_time_scale > 0.0 && std::isfinite(aging_time_scale))) {
        throw ConfigError("aging_time_scale must be positive");
    }
    if (!(min_duration >= 0.0)) throw ConfigError("min_duration must be >= 0");
    if (!linux_weights.empty() && linux_weights.size() != cores_per_machine) {
        throw ConfigError("linux weights must list every core");
    }
}

std::uint64_t machine_grid_seed(std::uint64_t seed, std::size_t machine) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(machine), 0x67726964u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

std::uint64_t machine_policy_seed(std::uint64_t seed, std::size_t machine) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(machine), 0x706f6cu};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct Event {
    double time;
    std::uint32_t machine;
    EventKind kind;
    std::uint64_t seq;
    std::uint64_t task;
    std::uint64_t version;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.machine != b.machine) return a.machine > b.machine;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.seq > b.seq;
    }
};

struct TaskRuntime {
    workload::InferenceTask def;
    std::uint32_t machine = 0;
    double remaining = 0.0;  // nominal-speed seconds of work left
    double rate = -1.0;      // work per wall second; -1 before first scheduling
    double last_progress = 0.0;
    std::uint64_t version = 0;
    std::optional<std::size_t> core;
    double housed_since = 0.0;
    bool done = false;
};

struct Machine {
    std::uint32_t id = 0;
    std::vector<ManagedCore> managed;
    std::vector<aging::CoreAging> aging;
    std::vector<double> aging_time;
    std::vector<double> busy_time;
    std::deque<std::uint64_t> oversub_queue;  // FIFO promotion order
    std::vector<std::uint64_t> running;       // housed and unhoused
    baselines::CoreWorkLedger ledger;
    std::mt19937_64 rng;
};

class Simulation {
public:
    Simulation(const SimConfig& cfg, std::uint64_t seed) : cfg_(cfg), f_nominal_(cfg.variation.nominal_frequency()) {
        machines_.resize(cfg.machines);
        for (std::size_t m = 0; m < cfg.machines; ++m) {
            auto& mc = machines_[m];
            mc.id = static_cast<std::uint32_t>(m);
            const auto f0 = aging::sample_core_frequencies(cfg.variation, cfg.cores_per_machine,
                                                           machine_grid_seed(seed, m));
            mc.managed.resize(cfg.cores_per_machine);
            mc.aging.resize(cfg.cores_per_machine);
            for (std::size_t c = 0; c < cfg.cores_per_machine; ++c) {
                mc.managed[c].core_id = c;
                mc.managed[c].idle_open_since = 0.0;
                mc.aging[c].f0 = f0[c];
            }
            mc.aging_time.assign(cfg.cores_per_machine, 0.0);
            mc.busy_time.assign(cfg.cores_per_machine, 0.0);
            mc.ledger = baselines::CoreWorkLedger(cfg.cores_per_machine);
            mc.rng.seed(machine_policy_seed(seed, m));
        }
    }

    RunResult run(const std::vector<workload::Request>& trace) {
        load_trace(trace);
        if (cfg_.policy == PolicyKind::Proposed) {
            for (auto& m : machines_) push(cfg_.reaction.idling_period, m.id, EventKind::IdlingPass);
        }

        double last_time = 0.0;
        while (!queue_.empty()) {
            const Event ev = queue_.top();
            if (ev.kind == EventKind::IdlingPass && pending_arrivals_ == 0 && running_total_ == 0 &&
                ev.time > cfg_.min_duration) {
                break;
            }
            queue_.pop();
            if (ev.kind == EventKind::Completion) {
                const auto& t = tasks_[ev.task];
                if (t.done || t.version != ev.version) continue;
            }
            last_time = ev.time;
            auto& m = machines_[ev.machine];
            progress(m, ev.time);
            switch (ev.kind) {
                case EventKind::Arrival: on_arrival(m, ev.task, ev.time); break;
                case EventKind::Completion: on_completion(m, ev.task, ev.time); break;
                case EventKind::IdlingPass: on_idling_pass(m, ev.time); break;
            }
            reschedule(m, ev.time);
            sample(m, ev.time);
        }

        result_.end_time = std::max(last_time, cfg_.min_duration);
        for (auto& m : machines_) {
            for (std::size_t c = 0; c < m.managed.size(); ++c) touch(m, c, result_.end_time);
            sample(m, result_.end_time);
            result_.machines.push_back(report(m));
        }
        return std::move(result_);
    }

private:
    void push(double time, std::uint32_t machine, EventKind kind, std::uint64_t task = kNoTask,
              std::uint64_t version = 0) {
        queue_.push(Event{time, machine, kind, seq_++, task, version});
    }

    void load_trace(const std::vector<workload::Request>& trace) {
        std::vector<std::size_t> order(trace.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(),
                         [&trace](std::size_t a, std::size_t b) { return trace[a].arrival < trace[b].arrival; });
        std::size_t round_robin = 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& req = trace[order[k]];
            std::size_t machine = 0;
            if (req.machine) {
                if (*req.machine >= cfg_.machines) {
                    throw ConfigError("trace routes a request to machine " + std::to_string(*req.machine) +
                                      " but the cluster has " + std::to_string(cfg_.machines));
                }
                machine = *req.machine;
            } else {
                machine = round_robin++ % cfg_.machines;
            }
            for (const auto& task : workload::expand_request(req, k, cfg_.durations, cfg_.iteration_interval)) {
                TaskRuntime rt;
                rt.def = task;
                rt.machine = static_cast<std::uint32_t>(machine);
                rt.remaining = task.nominal_duration;
                tasks_.push_back(rt);
                push(task.start, rt.machine, EventKind::Arrival, tasks_.size() - 1);
            }
        }
        pending_arrivals_ = tasks_.size();
        result_.arrived_tasks = 0;
    }

    static aging::CoreState thermal_state(const ManagedCore& c) {
        if (c.failed || c.idle_state == IdleState::DeepIdle) return aging::CoreState::DeepIdle;
        return c.assigned_task ? aging::CoreState::ActiveAllocated : aging::CoreState::ActiveUnallocated;
    }

    // Lazy aging update of one core up to `now` in its current state.
    void touch(Machine& m, std::size_t c, double now) {
        auto& core = m.aging[c];
        m.aging_time[c] +=
            aging::apply_state_interval(core, thermal_state(m.managed[c]), now, cfg_.aging, cfg_.aging_time_scale);
        if (!core.failed && core.vth_shift >= cfg_.aging.headroom()) retire(m, c, now);
    }

    void retire(Machine& m, std::size_t c, double now) {
        m.aging[c].failed = true;
        m.managed[c].failed = true;
        if (m.managed[c].assigned_task) {
            const auto id = *m.managed[c].assigned_task;
            m.busy_time[c] += now - tasks_[id].housed_since;
            tasks_[id].core.reset();
            m.managed[c].assigned_task.reset();
            m.oversub_queue.push_front(id);
        }
    }

    double frequency(const Machine& m, std::size_t c) const {
        const auto& core = m.aging[c];
        if (core.failed) return 0.0;
        return core.f0 * (1.0 - core.vth_shift / cfg_.aging.headroom());
    }

    void progress(Machine& m, double now) {
        for (auto id : m.running) {
            auto& t = tasks_[id];
            if (t.rate > 0.0) t.remaining = std::max(0.0, t.remaining - t.rate * (now - t.last_progress));
            t.last_progress = now;
        }
    }

    std::optional<std::size_t> choose_core(Machine& m, double now) {
        switch (cfg_.policy) {
            case PolicyKind::Proposed: return policy::select_core(m.managed, now);
            case PolicyKind::Linux: return baselines::linux_select_core(m.managed, cfg_.linux_weights, m.rng);
            case PolicyKind::LeastAged: return baselines::least_aged_select_core(m.managed, m.ledger);
        }
        return std::nullopt;
    }

    void house(Machine& m, std::uint64_t id, std::size_t c, double now) {
        touch(m, c, now);
        policy::record_idle_transition(m.managed[c], IdleEvent::TaskAssigned, now);
        m.managed[c].assigned_task = id;
        tasks_[id].core = c;
        tasks_[id].housed_since = now;
    }

    void log(double time, const Machine& m, EventKind kind, std::uint64_t task, std::optional<std::size_t> core,
             long long detail = 0) {
        if (!cfg_.record_events) return;
        result_.events.push_back(
            {time, m.id, kind, task, core ? static_cast<long long>(*core) : -1LL, detail});
    }

    void on_arrival(Machine& m, std::uint64_t id, double now) {
        --pending_arrivals_;
        ++running_total_;
        ++result_.arrived_tasks;
        auto& t = tasks_[id];
        t.last_progress = now;
        m.running.push_back(id);
        const auto core = choose_core(m, now);
        if (core) {
            house(m, id, *core, now);
        } else {
            m.oversub_queue.push_back(id);
        }
        log(now, m, EventKind::Arrival, id, core);
    }

    void on_completion(Machine& m, std::uint64_t id, double now) {
        auto& t = tasks_[id];
        t.done = true;
        t.remaining = 0.0;
        --running_total_;
        ++result_.completed_tasks;
        m.running.erase(std::find(m.running.begin(), m.running.end(), id));
        const auto core = t.core;
        if (core) {
            const std::size_t c = *core;
            touch(m, c, now);
            m.ledger.add(c, now - t.housed_since);
            m.busy_time[c] += now - t.housed_since;
            m.managed[c].assigned_task.reset();
            policy::record_idle_transition(m.managed[c], IdleEvent::BecameIdle, now);
            if (!m.oversub_queue.empty() && !m.managed[c].failed) {
                const auto next = m.oversub_queue.front();
                m.oversub_queue.pop_front();
                house(m, next, c, now);
            }
        } else {
            m.oversub_queue.erase(std::find(m.oversub_queue.begin(), m.oversub_queue.end(), id));
        }
        log(now, m, EventKind::Completion, id, core);
    }

    void on_idling_pass(Machine& m, double now) {
        for (std::size_t c = 0; c < m.managed.size(); ++c) {
            touch(m, c, now);
            m.managed[c].age_estimate = cfg_.age_proxy == AgeProxy::VthShift ? m.aging[c].vth_shift
                                                                             : f_nominal_ - frequency(m, c);
        }
        auto decision = policy::adjust_sleeping_cores(m.managed, m.oversub_queue.size(), cfg_.reaction);
        for (const auto& tr : decision.transitions) m.managed[tr.core_id].idle_state = tr.new_state;
        while (!m.oversub_queue.empty()) {
            const auto core = policy::select_core(m.managed, now);
            if (!core) break;
            const auto next = m.oversub_queue.front();
            m.oversub_queue.pop_front();
            house(m, next, *core, now);
        }
        log(now, m, EventKind::IdlingPass, kNoTask, std::nullopt, decision.correction);
        if (cfg_.record_idling) {
            decision.transitions.clear();
            result_.idling.push_back({now, m.id, std::move(decision)});
        }
        push(now + cfg_.reaction.idling_period, m.id, EventKind::IdlingPass);
    }

    // Processor sharing: with T tasks on A active cores and T > A, every task
    // slows by T/A. Unhoused tasks run at the mean active-core frequency.
    void reschedule(Machine& m, double now) {
        if (m.running.empty()) return;
        std::size_t active = 0;
        double f_sum = 0.0;
        for (std::size_t c = 0; c < m.managed.size(); ++c) {
            if (m.managed[c].failed || m.managed[c].idle_state != IdleState::Active) continue;
            ++active;
            f_sum += frequency(m, c);
        }
        const double tasks = static_cast<double>(m.running.size());
        const double slowdown = (active > 0 && tasks > static_cast<double>(active)) ? tasks / static_cast<double>(active) : 1.0;
        const double f_shared = active > 0 ? f_sum / static_cast<double>(active) : 0.0;
        for (auto id : m.running) {
            auto& t = tasks_[id];
            const double f = t.core ? frequency(m, *t.core) : f_shared;
            const double rate = active > 0 ? f / f_nominal_ / slowdown : 0.0;
            if (rate == t.rate) continue;
            t.rate = rate;
            ++t.version;
            if (rate > 0.0) push(now + t.remaining / rate, m.id, EventKind::Completion, id, t.version);
        }
    }

    void sample(const Machine& m, double now) {
        if (!cfg_.record_samples) return;
        std::uint32_t idle = 0;
        for (const auto& c : m.managed) {
            if (c.idle_state == IdleState::DeepIdle) ++idle;
        }
        result_.samples.push_back({now, m.id, static_cast<std::uint32_t>(m.managed.size()), idle,
                                   static_cast<std::uint32_t>(m.running.size())});
    }

    MachineReport report(const Machine& m) const {
        MachineReport r;
        r.machine_id = m.id;
        for (std::size_t c = 0; c < m.managed.size(); ++c) {
            CoreReport cr;
            cr.core_id = c;
            cr.f0 = m.aging[c].f0;
            cr.vth_shift = m.aging[c].vth_shift;
            cr.frequency = frequency(m, c);
            cr.failed = m.aging[c].failed;
            cr.idle_state = m.managed[c].idle_state;
            cr.aging_time = m.aging_time[c];
            cr.busy_time = m.busy_time[c];
            r.cores.push_back(cr);
        }
        return r;
    }

    const SimConfig& cfg_;
    double f_nominal_;
    std::vector<Machine> machines_;
    std::vector<TaskRuntime> tasks_;
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::uint64_t seq_ = 0;
    std::uint64_t pending_arrivals_ = 0;
    std::uint64_t running_total_ = 0;
    RunResult result_;
};

}  // namespace

RunResult run_simulation(const SimConfig& config, const std::vector<workload::Request>& trace, std::uint64_t seed) {
    config.validate();
    Simulation sim(config, seed);
    return sim.run(trace);
}

void write_event_log_csv(std::ostream& out, const EventLog& log) {
    out << "time,machine,kind,task,core,detail\n";
    for (const auto& e : log) {
        out << csv::format_double(e.time) << ',' << e.machine << ',' << event_kind_name(e.kind) << ',';
        if (e.task != kNoTask) out << e.task;
        out << ',' << e.core << ',' << e.detail << '\n';
    }
}

void write_core_csv(std::ostream& out, const MachineReport& machine) {
    out << "core_id,f0,vth_shift,frequency\n";
    for (const auto& c : machine.cores) {
        out << c.core_id << ',' << csv::format_double(c.f0) << ',' << csv::format_double(c.vth_shift) << ','
            << csv::format_double(c.frequency) << '\n';
    }
}

void write_samples_csv(std::ostream& out, const std::vector<metrics::MetricSample>& samples) {
    out << "t,machine,n_total,n_idle,n_running\n";
    for (const auto& s : samples) {
        out << csv::format_double(s.t) << ',' << s.machine << ',' << s.n_total << ',' << s.n_idle << ','
            << s.n_running << '\n';
    }
}

void write_idling_csv(std::ostream& out, const std::vector<IdlingRecord>& records) {
    out << "t,machine,N,C_SLP,T,e,F,e_corr\n";
    for (const auto& r : records) {
        const auto& d = r.decision;
        out << csv::format_double(r.t) << ',' << r.machine << ',' << d.total << ',' << d.sleeping << ',' << d.tasks
            << ',' << csv::format_double(d.error) << ',' << csv::format_double(d.response) << ',' << d.correction
            << '\n';
    }
}

}  // namespace agingsim::engine
