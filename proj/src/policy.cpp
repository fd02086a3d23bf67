#include "agingsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "agingsim/errors.hpp"

namespace agingsim::policy {

void IdleHistory::push(double duration) {
    buf_[head_] = duration;
    head_ = (head_ + 1) % kCapacity;
    size_ = std::min(size_ + 1, kCapacity);
}

double IdleHistory::sum() const {
    double s = 0.0;
    const std::size_t start = (head_ + kCapacity - size_) % kCapacity;
    for (std::size_t k = 0; k < size_; ++k) s += buf_[(start + k) % kCapacity];
    return s;
}

std::vector<double> IdleHistory::values() const {
    std::vector<double> out;
    out.reserve(size_);
    const std::size_t start = (head_ + kCapacity - size_) % kCapacity;
    for (std::size_t k = 0; k < size_; ++k) out.push_back(buf_[(start + k) % kCapacity]);
    return out;
}

void record_idle_transition(ManagedCore& core, IdleEvent event, double now) {
    switch (event) {
        case IdleEvent::BecameIdle:
            if (core.idle_open_since) throw StateError("core is already idle");
            core.idle_open_since = now;
            return;
        case IdleEvent::TaskAssigned:
            if (!core.idle_open_since) throw StateError("task assigned to a core with no open idle interval");
            if (now < *core.idle_open_since) throw StateError("idle interval closes before it opened");
            core.idle_history.push(now - *core.idle_open_since);
            core.idle_open_since.reset();
            return;
    }
}

double idle_score(const ManagedCore& core, double now) {
    double score = core.idle_history.sum();
    if (core.idle_open_since) score += now - *core.idle_open_since;
    return score;
}

std::optional<std::size_t> select_core(std::span<const ManagedCore> cores, double now) {
    std::optional<std::size_t> selected;
    double selected_score = 0.0;
    for (const auto& core : cores) {
        if (core.failed || core.idle_state != IdleState::Active || core.assigned_task) continue;
        const double score = idle_score(core, now);
        if (!selected || score > selected_score) {
            selected = core.core_id;
            selected_score = score;
        }
    }
    return selected;
}

void ReactionParams::validate() const {
    if (!(pos_gain > 0.0 && pos_gain < std::numbers::pi / 2.0)) {
        throw ConfigError("reaction: pos_gain must lie in (0, pi/2)");
    }
    if (!(neg_gain > pos_gain)) throw ConfigError("reaction: neg_gain must exceed pos_gain");
    if (!(idling_period > 0.0 && std::isfinite(idling_period))) {
        throw ConfigError("reaction: idling_period must be positive");
    }
}

double reaction(double e_norm, const ReactionParams& params) {
    if (!(e_norm >= -1.0 && e_norm <= 1.0)) throw std::invalid_argument("reaction: input outside [-1, 1]");
    if (e_norm >= 0.0) return std::tan(params.pos_gain * e_norm);
    return std::atan(params.neg_gain * e_norm);
}

double reaction(double e_norm) { return reaction(e_norm, ReactionParams{}); }

IdlingDecision adjust_sleeping_cores(std::span<const ManagedCore> cores, std::size_t oversub_tasks,
                                     const ReactionParams& params) {
    IdlingDecision d;
    std::size_t active = 0, normal_tasks = 0;
    for (const auto& c : cores) {
        if (c.failed) continue;
        ++d.total;
        if (c.idle_state == IdleState::Active) ++active;
        if (c.assigned_task) ++normal_tasks;
    }
    if (d.total == 0) return d;

    const auto n = static_cast<double>(d.total);
    d.sleeping = d.total - active;
    d.tasks = std::min(d.total, normal_tasks + oversub_tasks);
    d.error = (n - static_cast<double>(d.sleeping) - static_cast<double>(d.tasks)) / n;
    d.response = reaction(d.error, params);
    d.correction = static_cast<long long>(n * d.response);  // truncates toward zero
    if (d.correction == 0) return d;

    const auto delta = static_cast<std::size_t>(std::llabs(d.correction));
    std::vector<const ManagedCore*> eligible;
    const bool to_idle = d.correction > 0;
    for (const auto& c : cores) {
        if (c.failed) continue;
        if (to_idle && c.idle_state == IdleState::Active && !c.assigned_task) eligible.push_back(&c);
        if (!to_idle && c.idle_state == IdleState::DeepIdle) eligible.push_back(&c);
    }
    // Most aged first when idling, least aged first when waking.
    std::stable_sort(eligible.begin(), eligible.end(), [to_idle](const ManagedCore* a, const ManagedCore* b) {
        return to_idle ? a->age_estimate > b->age_estimate : a->age_estimate < b->age_estimate;
    });
    const std::size_t count = std::min(delta, eligible.size());
    d.transitions.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        d.transitions.push_back({eligible[k]->core_id, to_idle ? IdleState::DeepIdle : IdleState::Active});
    }
    return d;
}

}  // namespace agingsim::policy
