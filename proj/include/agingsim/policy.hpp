#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace agingsim::policy {

enum class IdleState : std::uint8_t { Active, DeepIdle };

using TaskId = std::uint64_t;

// Fixed-capacity ring of the most recent closed idle durations.
class IdleHistory {
public:
    static constexpr std::size_t kCapacity = 8;

    void push(double duration);
    std::size_t size() const { return size_; }
    double sum() const;
    // Oldest first.
    std::vector<double> values() const;

private:
    std::array<double, kCapacity> buf_{};
    std::size_t head_ = 0;  // next write slot
    std::size_t size_ = 0;
};

struct ManagedCore {
    std::size_t core_id = 0;
    std::optional<TaskId> assigned_task;
    IdleHistory idle_history;
    std::optional<double> idle_open_since;
    IdleState idle_state = IdleState::Active;
    // Larger means more aged. Refreshed by the owner before each idling pass.
    double age_estimate = 0.0;
    // End-of-life cores are invisible to both algorithms.
    bool failed = false;
};

enum class IdleEvent : std::uint8_t { TaskAssigned, BecameIdle };

// Maintains the idle-interval bookkeeping that drives core selection.
// Throws StateError on an out-of-order event.
void record_idle_transition(ManagedCore& core, IdleEvent event, double now);

// Sum of closed idle intervals plus the open one, if any.
double idle_score(const ManagedCore& core, double now);

// Task-to-core mapping: the free Active core with the strictly greatest idle
// score, first in iteration order on ties. nullopt means oversubscribe.
std::optional<std::size_t> select_core(std::span<const ManagedCore> cores, double now);

struct ReactionParams {
    double pos_gain = 0.785;
    double neg_gain = 1.55;
    double idling_period = 1.0;  // s

    void validate() const;
};

// tan(pos_gain * e) for e >= 0, atan(neg_gain * e) otherwise.
double reaction(double e_norm, const ReactionParams& params);
double reaction(double e_norm);

struct Transition {
    std::size_t core_id = 0;
    IdleState new_state = IdleState::Active;
};

// One selective-idling decision, including the quantities of the controller.
struct IdlingDecision {
    std::size_t total = 0;        // N
    std::size_t sleeping = 0;     // C_SLP
    std::size_t tasks = 0;        // T, capped at N
    double error = 0.0;           // e
    double response = 0.0;        // F(e)
    long long correction = 0;     // int(N * F(e))
    std::vector<Transition> transitions;
};

// Selective core idling over a machine's full core list.
IdlingDecision adjust_sleeping_cores(std::span<const ManagedCore> cores, std::size_t oversub_tasks,
                                     const ReactionParams& params);

}  // namespace agingsim::policy
