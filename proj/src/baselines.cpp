#include "agingsim/baselines.hpp"

#include <cmath>
#include <istream>
#include <stdexcept>
#include <string>

#include "agingsim/csv.hpp"
#include "agingsim/errors.hpp"

namespace agingsim::baselines {

using policy::IdleState;
using policy::ManagedCore;

void CoreWorkLedger::add(std::size_t core_id, double seconds) {
    if (!(seconds >= 0.0)) throw std::invalid_argument("CoreWorkLedger: negative busy time");
    busy_.at(core_id) += seconds;
}

namespace {

bool is_free(const ManagedCore& c) {
    return !c.failed && c.idle_state == IdleState::Active && !c.assigned_task;
}

}  // namespace

std::optional<std::size_t> linux_select_core(std::span<const ManagedCore> cores, std::span<const double> weights,
                                             std::mt19937_64& rng) {
    std::vector<std::size_t> free;
    double total_weight = 0.0;
    for (const auto& c : cores) {
        if (!is_free(c)) continue;
        free.push_back(c.core_id);
        if (!weights.empty()) total_weight += weights[c.core_id];
    }
    if (free.empty()) return std::nullopt;
    if (free.size() == 1) return free.front();

    // Zero total weight over the free cores degrades to uniform rather than
    // oversubscribing while cores sit free.
    if (weights.empty() || !(total_weight > 0.0)) {
        std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
        return free[pick(rng)];
    }
    std::uniform_real_distribution<double> u(0.0, total_weight);
    const double x = u(rng);
    double acc = 0.0;
    for (std::size_t id : free) {
        acc += weights[id];
        if (x < acc) return id;
    }
    // Rounding at the top of the range.
    for (auto it = free.rbegin(); it != free.rend(); ++it) {
        if (weights[*it] > 0.0) return *it;
    }
    return free.back();
}

std::optional<std::size_t> least_aged_select_core(std::span<const ManagedCore> cores,
                                                  const CoreWorkLedger& ledger) {
    std::optional<std::size_t> best;
    for (const auto& c : cores) {
        if (!is_free(c)) continue;
        if (!best) {
            best = c.core_id;
            continue;
        }
        const double a = ledger.busy(c.core_id), b = ledger.busy(*best);
        if (a < b || (a == b && c.core_id < *best)) best = c.core_id;
    }
    return best;
}

std::vector<double> read_linux_weights(std::istream& in, std::size_t cores) {
    std::vector<std::string> header;
    std::size_t line = 0;
    if (!csv::read_header(in, header, line) || header != std::vector<std::string>{"core_id", "probability"}) {
        throw ParseError(line, "expected header 'core_id,probability'");
    }
    std::vector<double> w(cores, 0.0);
    std::vector<bool> seen(cores, false);
    csv::Row row;
    while (csv::next_row(in, row, line)) {
        if (row.fields.size() != 2) throw ParseError(row.line, "expected 2 fields");
        const auto id = csv::to_integer(row.fields[0], row.line);
        const double p = csv::to_double(row.fields[1], row.line);
        if (id < 0 || static_cast<std::size_t>(id) >= cores) throw ParseError(row.line, "core_id out of range");
        if (seen[static_cast<std::size_t>(id)]) throw ParseError(row.line, "duplicate core_id");
        if (!(p >= 0.0)) throw ParseError(row.line, "negative probability");
        seen[static_cast<std::size_t>(id)] = true;
        w[static_cast<std::size_t>(id)] = p;
    }
    double total = 0.0;
    for (double v : w) total += v;
    if (std::abs(total - 1.0) > 1e-6) throw ConfigError("linux weights must sum to 1 (got " + std::to_string(total) + ")");
    return w;
}

}  // namespace agingsim::baselines
