#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace agingsim::aging {

// Thermal/stress state of a core for one aging interval.
enum class CoreState : std::uint8_t { ActiveAllocated, ActiveUnallocated, DeepIdle };

inline constexpr double kBoltzmannEvPerK = 8.617333262e-5;
inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

struct TemperatureTable {
    double active_allocated_k = 327.15;    // 54 C
    double active_unallocated_k = 324.23;  // 51.08 C
    double deep_idle_k = 321.15;           // 48 C

    double at(CoreState s) const;
};

// NBTI reaction-diffusion constants. k_fit is normally produced by calibrate_k.
struct AgingParams {
    double k_fit = 0.0;
    double e0 = 0.08;              // eV
    double boltzmann = kBoltzmannEvPerK;
    double b_field = 0.04;         // eV*nm/V
    double t_ox = 1.2;             // nm
    double v_dd = 0.9;             // V
    double v_th0 = 0.35;           // V
    double n_exp = 1.0 / 6.0;
    double stress_y = 1.0;
    TemperatureTable temp_table{};

    double headroom() const { return v_dd - v_th0; }

    // Throws ConfigError on any violated invariant.
    void validate() const;
};

// Aging factor for a core held in `state`. Exactly zero for DeepIdle.
double adf(CoreState state, const AgingParams& params);

// One step of the interval recursion
//   dVth_p = A * ((dVth_{p-1} / A)^(1/n) + tau)^n
// A zero ADF leaves the shift untouched bit-for-bit.
double advance_vth(double vth_prev, double adf_p, double tau, double n_exp);

// K such that `lifetime_s` of continuous allocated stress from a fresh core
// shifts V_th by target_drop * (v_dd - v_th0). Ignores params.k_fit.
double calibrate_k(double target_drop, double lifetime_s, const AgingParams& params);

// Per-core aging state. The ADF state is supplied by the owner on each update.
struct CoreAging {
    double f0 = 1.0;
    double vth_shift = 0.0;
    double last_update = 0.0;
    bool failed = false;
};

// f0 * (1 - vth_shift / (v_dd - v_th0)). Throws EndOfLifeError once that is <= 0.
double core_frequency(const CoreAging& core, const AgingParams& params);

// Advances `core` from last_update to `until` in `state`; `time_scale` stretches
// simulated seconds into aging seconds. Returns the aging tau applied.
double apply_state_interval(CoreAging& core, CoreState state, double until,
                            const AgingParams& params, double time_scale = 1.0);

// ---------------------------------------------------------------------------
// Process variation

struct VariationSettings {
    std::size_t n_chip = 10;
    double alpha = 0.5;   // correlation decay per grid cell
    double mean_p = 1.0;
    double sigma_p = 0.05;
    double k_prime = 1.0;

    double nominal_frequency() const { return k_prime / mean_p; }
    void validate() const;
};

struct GridCell {
    std::size_t i = 0;
    std::size_t j = 0;
};

struct VariationGrid {
    std::size_t n_chip = 0;
    double alpha = 0.0;
    double mean_p = 0.0;
    double sigma_p = 0.0;
    std::vector<double> cells;                          // row-major n_chip x n_chip
    std::vector<std::vector<std::size_t>> core_sections;  // flat cell indices per core

    double at(std::size_t i, std::size_t j) const { return cells[i * n_chip + j]; }
};

// Correlated Gaussian field with rho = exp(-alpha * d). Deterministic per seed.
// core_sections is left empty; see assign_core_sections.
VariationGrid sample_variation_grid(std::size_t n_chip, double alpha, double mean_p,
                                    double sigma_p, std::uint64_t seed);

// Partitions the grid into equal row-major rectangular blocks, one per core.
// Cores beyond the block count wrap around.
void assign_core_sections(VariationGrid& grid, std::size_t cores);

// k_prime * min over the core's section of 1/p.
double initial_core_frequency(const VariationGrid& grid, std::size_t core_id, double k_prime);

// Samples a grid, maps `cores` onto it and returns every core's f0.
std::vector<double> sample_core_frequencies(const VariationSettings& settings, std::size_t cores,
                                            std::uint64_t seed);

// CSV with header `i,j,p`.
void write_grid_csv(std::ostream& out, const VariationGrid& grid);
VariationGrid read_grid_csv(std::istream& in);

}  // namespace agingsim::aging
