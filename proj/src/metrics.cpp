#include "agingsim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "agingsim/errors.hpp"

namespace agingsim::metrics {

namespace {

double percentile_sorted(const std::vector<double>& sorted, double p) {
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - static_cast<double>(lo));
}

}  // namespace

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: no values");
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile: p outside [0, 100]");
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, p);
}

double percentile(const std::map<double, std::uint64_t>& counts, double p) {
    std::uint64_t total = 0;
    for (const auto& [_, n] : counts) total += n;
    if (total == 0) throw std::invalid_argument("percentile: no values");
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile: p outside [0, 100]");
    const double rank = p / 100.0 * static_cast<double>(total - 1);
    const auto lo = static_cast<std::uint64_t>(std::floor(rank));
    const std::uint64_t hi = std::min(lo + 1, total - 1);
    double lo_v = 0.0, hi_v = 0.0;
    std::uint64_t seen = 0;
    bool lo_found = false;
    for (const auto& [v, n] : counts) {
        seen += n;
        if (!lo_found && lo < seen) {
            lo_v = v;
            lo_found = true;
        }
        if (hi < seen) {
            hi_v = v;
            break;
        }
    }
    return lo_v + (hi_v - lo_v) * (rank - static_cast<double>(lo));
}

double frequency_cv(std::span<const double> freqs) {
    if (freqs.size() < 2) throw std::invalid_argument("frequency_cv: need at least two cores");
    double mean = 0.0;
    for (double f : freqs) mean += f;
    mean /= static_cast<double>(freqs.size());
    if (!(mean > 0.0)) throw FailedCpuError("frequency_cv: mean frequency is not positive");
    double var = 0.0;
    for (double f : freqs) var += (f - mean) * (f - mean);
    var /= static_cast<double>(freqs.size());
    return std::sqrt(var) / mean;
}

double mean_degradation(std::span<const double> f0s, std::span<const double> freqs) {
    if (f0s.size() != freqs.size()) throw std::invalid_argument("mean_degradation: length mismatch");
    if (f0s.empty()) throw std::invalid_argument("mean_degradation: no cores");
    double sum = 0.0;
    for (std::size_t k = 0; k < f0s.size(); ++k) sum += f0s[k] - freqs[k];
    return sum / static_cast<double>(f0s.size());
}

double oversubscription_integral(std::span<const MetricSample> samples, std::uint32_t machine) {
    double total = 0.0;
    const MetricSample* prev = nullptr;
    for (const auto& s : samples) {
        if (s.machine != machine) continue;
        if (prev) {
            if (s.t < prev->t) throw std::invalid_argument("oversubscription_integral: samples out of order");
            const double active = static_cast<double>(prev->n_total) - static_cast<double>(prev->n_idle);
            const double excess = static_cast<double>(prev->n_running) - active;
            if (excess > 0.0) total += excess * (s.t - prev->t);
        }
        prev = &s;
    }
    return total;
}

double normalized_idle(const MetricSample& s) {
    if (s.n_total == 0) throw std::invalid_argument("normalized_idle: machine without cores");
    const double n = s.n_total;
    const double v = (n - static_cast<double>(s.n_idle) - static_cast<double>(s.n_running)) / n;
    return std::clamp(v, -1.0, 1.0);
}

NormalizedIdleSummary normalized_idle_series(std::span<const MetricSample> samples) {
    NormalizedIdleSummary out;
    if (samples.empty()) return out;
    out.values.reserve(samples.size());
    for (const auto& s : samples) out.values.push_back(normalized_idle(s));
    std::vector<double> sorted = out.values;
    std::sort(sorted.begin(), sorted.end());
    out.p1 = percentile_sorted(sorted, 1.0);
    out.p50 = percentile_sorted(sorted, 50.0);
    out.p90 = percentile_sorted(sorted, 90.0);
    out.min = sorted.front();
    return out;
}

void CarbonParams::validate() const {
    if (!(base_lifetime > 0.0 && cpu_embodied > 0.0 && machines > 0.0)) {
        throw ConfigError("carbon parameters must be positive");
    }
}

CarbonEstimate estimate_yearly_embodied(double deg_technique, double deg_linux, const CarbonParams& params) {
    params.validate();
    if (!(deg_technique > 0.0)) throw std::domain_error("no measurable aging for the technique");
    if (!(deg_linux > 0.0)) throw std::domain_error("no measurable aging for the linux baseline");
    CarbonEstimate e;
    e.ratio = deg_technique / deg_linux;
    e.lifetime = params.base_lifetime * (deg_linux / deg_technique);
    e.yearly = params.machines * params.cpu_embodied / e.lifetime;
    e.reduction = 1.0 - e.ratio;
    return e;
}

}  // namespace agingsim::metrics
