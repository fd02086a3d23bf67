#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "agingsim/policy.hpp"

namespace agingsim::baselines {

// Wall-clock seconds each core has spent holding tasks, used as the
// least-aged policy's age estimate.
class CoreWorkLedger {
public:
    explicit CoreWorkLedger(std::size_t cores = 0) : busy_(cores, 0.0) {}

    void add(std::size_t core_id, double seconds);
    double busy(std::size_t core_id) const { return busy_.at(core_id); }
    std::size_t size() const { return busy_.size(); }

private:
    std::vector<double> busy_;
};

// Probabilistic placement. With no weights, uniform over free cores; with
// weights (one per core, summing to 1), proportional to the free cores' weights.
std::optional<std::size_t> linux_select_core(std::span<const policy::ManagedCore> cores,
                                             std::span<const double> weights, std::mt19937_64& rng);

// Free core with the least executed work; lowest core id on ties.
std::optional<std::size_t> least_aged_select_core(std::span<const policy::ManagedCore> cores,
                                                  const CoreWorkLedger& ledger);

// `core_id,probability` CSV. Cores not listed get probability 0.
std::vector<double> read_linux_weights(std::istream& in, std::size_t cores);

}  // namespace agingsim::baselines
