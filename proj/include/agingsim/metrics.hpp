#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace agingsim::metrics {

// Machine state observed at an event boundary. Piecewise constant until the
// machine's next sample.
struct MetricSample {
    double t = 0.0;
    std::uint32_t machine = 0;
    std::uint32_t n_total = 0;
    std::uint32_t n_idle = 0;     // deep-idle cores
    std::uint32_t n_running = 0;  // all running tasks, oversubscribed included
};

// Signals a CPU whose mean frequency is not positive.
class FailedCpuError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

// Same, over a value -> multiplicity histogram.
double percentile(const std::map<double, std::uint64_t>& counts, double p);

// Population standard deviation over mean.
double frequency_cv(std::span<const double> freqs);

// Mean over cores of f0 - f.
double mean_degradation(std::span<const double> f0s, std::span<const double> freqs);

// Integral of max(0, T - active) over the machine's sample series, task*s.
double oversubscription_integral(std::span<const MetricSample> samples, std::uint32_t machine);

// ((N - N_idle) - T) / N, clamped to [-1, 1]. Negative means oversubscribed.
double normalized_idle(const MetricSample& s);

struct NormalizedIdleSummary {
    std::vector<double> values;
    double p1 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double min = 0.0;
};

// Pooled over every machine's samples.
NormalizedIdleSummary normalized_idle_series(std::span<const MetricSample> samples);

struct CarbonParams {
    double base_lifetime = 3.0;   // years
    double cpu_embodied = 278.3;  // kgCO2eq per server CPU over base_lifetime
    double machines = 22.0;

    void validate() const;
};

struct CarbonEstimate {
    double ratio = 1.0;          // deg_technique / deg_linux
    double lifetime = 0.0;       // years
    double yearly = 0.0;         // kgCO2eq per year for the cluster
    double reduction = 0.0;      // fraction vs linux
};

// Linear lifetime extension: lifetime scales with deg_linux / deg_technique.
// Throws std::domain_error when either degradation is not positive.
CarbonEstimate estimate_yearly_embodied(double deg_technique, double deg_linux, const CarbonParams& params);

}  // namespace agingsim::metrics
