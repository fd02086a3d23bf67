#include "agingsim/aging.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "agingsim/csv.hpp"
#include "agingsim/errors.hpp"

namespace agingsim::aging {

double TemperatureTable::at(CoreState s) const {
    switch (s) {
        case CoreState::ActiveAllocated: return active_allocated_k;
        case CoreState::ActiveUnallocated: return active_unallocated_k;
        case CoreState::DeepIdle: return deep_idle_k;
    }
    return active_allocated_k;
}

void AgingParams::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(finite(v_dd) && finite(v_th0) && v_th0 > 0.0 && v_dd > v_th0)) {
        throw ConfigError("aging: require v_dd > v_th0 > 0");
    }
    if (!(n_exp > 0.0 && n_exp < 1.0)) throw ConfigError("aging: n_exp must lie in (0, 1)");
    if (!(stress_y >= 0.0 && stress_y <= 1.0)) throw ConfigError("aging: stress_y must lie in [0, 1]");
    if (!(k_fit >= 0.0 && finite(k_fit))) throw ConfigError("aging: k_fit must be finite and >= 0");
    if (!(boltzmann > 0.0 && finite(boltzmann))) throw ConfigError("aging: boltzmann must be > 0");
    if (!(t_ox > 0.0 && finite(t_ox))) throw ConfigError("aging: t_ox must be > 0");
    if (!(finite(e0) && finite(b_field))) throw ConfigError("aging: e0 and b_field must be finite");
    const auto& t = temp_table;
    if (!(t.deep_idle_k > 0.0 && t.deep_idle_k < t.active_unallocated_k &&
          t.active_unallocated_k < t.active_allocated_k && finite(t.active_allocated_k))) {
        throw ConfigError("aging: temperatures must satisfy 0 < deep_idle < active_unallocated < active_allocated");
    }
}

namespace {

// ADF without the fitting constant, evaluated at temperature T.
double unit_adf(double temperature_k, const AgingParams& p) {
    const double kt = p.boltzmann * temperature_k;
    return std::exp(-p.e0 / kt) * std::exp(p.b_field * p.v_dd / (p.t_ox * kt)) *
           std::pow(p.stress_y, p.n_exp);
}

}  // namespace

double adf(CoreState state, const AgingParams& params) {
    if (state == CoreState::DeepIdle) return 0.0;
    return params.k_fit * unit_adf(params.temp_table.at(state), params);
}

double advance_vth(double vth_prev, double adf_p, double tau, double n_exp) {
    if (!(tau >= 0.0)) throw std::invalid_argument("advance_vth: negative interval");
    if (!(vth_prev >= 0.0)) throw std::invalid_argument("advance_vth: negative threshold shift");
    if (adf_p == 0.0 || tau == 0.0) return vth_prev;
    const double equivalent_time = vth_prev == 0.0 ? 0.0 : std::pow(vth_prev / adf_p, 1.0 / n_exp);
    const double next = adf_p * std::pow(equivalent_time + tau, n_exp);
    return std::max(vth_prev, next);
}

double calibrate_k(double target_drop, double lifetime_s, const AgingParams& params) {
    if (!(target_drop > 0.0 && target_drop < 1.0)) {
        throw ConfigError("calibrate_k: target_drop must lie in (0, 1)");
    }
    if (!(lifetime_s > 0.0 && std::isfinite(lifetime_s))) {
        throw ConfigError("calibrate_k: lifetime must be positive");
    }
    AgingParams p = params;
    p.k_fit = 0.0;
    p.validate();
    const double denom = unit_adf(p.temp_table.active_allocated_k, p) * std::pow(lifetime_s, p.n_exp);
    const double k = target_drop * p.headroom() / denom;
    if (!std::isfinite(k) || !(k > 0.0)) {
        throw ConfigError("calibrate_k: non-finite intermediate; check e0/b_field/t_ox");
    }
    return k;
}

double core_frequency(const CoreAging& core, const AgingParams& params) {
    const double f = core.f0 * (1.0 - core.vth_shift / params.headroom());
    if (!(f > 0.0)) throw EndOfLifeError("core frequency reached zero");
    return f;
}

double apply_state_interval(CoreAging& core, CoreState state, double until, const AgingParams& params,
                            double time_scale) {
    if (until < core.last_update) {
        throw StateError("apply_state_interval: time regression");
    }
    const double tau = (until - core.last_update) * time_scale;
    core.vth_shift = advance_vth(core.vth_shift, adf(state, params), tau, params.n_exp);
    core.last_update = until;
    return tau;
}

// ---------------------------------------------------------------------------

void VariationSettings::validate() const {
    if (n_chip < 1) throw ConfigError("variation: n_chip must be >= 1");
    if (!(alpha >= 0.0)) throw ConfigError("variation: alpha must be >= 0");
    if (!(sigma_p >= 0.0 && std::isfinite(sigma_p))) throw ConfigError("variation: sigma_p must be >= 0");
    if (!(mean_p > 0.0 && std::isfinite(mean_p))) throw ConfigError("variation: mean_p must be > 0");
    if (!(k_prime > 0.0 && std::isfinite(k_prime))) throw ConfigError("variation: k_prime must be > 0");
}

VariationGrid sample_variation_grid(std::size_t n_chip, double alpha, double mean_p, double sigma_p,
                                    std::uint64_t seed) {
    if (n_chip < 1) throw std::invalid_argument("sample_variation_grid: n_chip must be >= 1");
    if (!(sigma_p >= 0.0)) throw std::invalid_argument("sample_variation_grid: sigma_p must be >= 0");
    if (!(alpha >= 0.0)) throw std::invalid_argument("sample_variation_grid: alpha must be >= 0");

    VariationGrid grid;
    grid.n_chip = n_chip;
    grid.alpha = alpha;
    grid.mean_p = mean_p;
    grid.sigma_p = sigma_p;
    const std::size_t cells = n_chip * n_chip;
    grid.cells.assign(cells, mean_p);
    if (sigma_p == 0.0) return grid;

    const double variance = sigma_p * sigma_p;
    Eigen::MatrixXd cov(cells, cells);
    for (std::size_t a = 0; a < cells; ++a) {
        const double ai = static_cast<double>(a / n_chip);
        const double aj = static_cast<double>(a % n_chip);
        for (std::size_t b = 0; b < cells; ++b) {
            const double di = ai - static_cast<double>(b / n_chip);
            const double dj = aj - static_cast<double>(b % n_chip);
            const double dist = std::sqrt(di * di + dj * dj);
            // exp(-inf * 0) is NaN; the diagonal is always fully correlated.
            const double rho = dist == 0.0 ? 1.0 : std::exp(-alpha * dist);
            cov(a, b) = variance * rho;
        }
        cov(a, a) += 1e-10;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw ConfigError("sample_variation_grid: covariance not positive-definite for alpha=" +
                          std::to_string(alpha) + ", sigma_p=" + std::to_string(sigma_p));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(cells);
    for (std::size_t k = 0; k < cells; ++k) z(k) = normal(rng);
    const Eigen::VectorXd draw = llt.matrixL() * z;
    for (std::size_t k = 0; k < cells; ++k) grid.cells[k] = mean_p + draw(k);
    return grid;
}

void assign_core_sections(VariationGrid& grid, std::size_t cores) {
    if (cores == 0) throw std::invalid_argument("assign_core_sections: no cores");
    const std::size_t n = grid.n_chip;

    // Largest block (by area) that still yields one block per core; ties go to the
    // wider block. Falls back to single cells when cores outnumber cells.
    std::size_t best_h = 1, best_w = 1, best_area = 0;
    for (std::size_t h = 1; h <= n; ++h) {
        for (std::size_t w = 1; w <= n; ++w) {
            const std::size_t count = (n / h) * (n / w);
            if (count < cores) continue;
            const std::size_t area = h * w;
            if (area > best_area || (area == best_area && h < best_h)) {
                best_area = area;
                best_h = h;
                best_w = w;
            }
        }
    }
    const std::size_t per_row = n / best_w;
    const std::size_t block_count = (n / best_h) * per_row;

    grid.core_sections.assign(cores, {});
    for (std::size_t core = 0; core < cores; ++core) {
        const std::size_t block = core % block_count;
        const std::size_t r0 = (block / per_row) * best_h;
        const std::size_t c0 = (block % per_row) * best_w;
        auto& section = grid.core_sections[core];
        for (std::size_t r = r0; r < r0 + best_h; ++r) {
            for (std::size_t c = c0; c < c0 + best_w; ++c) section.push_back(r * n + c);
        }
    }
}

double initial_core_frequency(const VariationGrid& grid, std::size_t core_id, double k_prime) {
    if (core_id >= grid.core_sections.size() || grid.core_sections[core_id].empty()) {
        throw std::invalid_argument("initial_core_frequency: core has no grid section");
    }
    double worst = 0.0;
    for (std::size_t cell : grid.core_sections[core_id]) {
        const double p = grid.cells.at(cell);
        if (!(p > 0.0)) throw ResampleRequired("initial_core_frequency: non-positive grid cell");
        worst = std::max(worst, p);
    }
    return k_prime / worst;
}

std::vector<double> sample_core_frequencies(const VariationSettings& settings, std::size_t cores,
                                            std::uint64_t seed) {
    settings.validate();
    auto grid = sample_variation_grid(settings.n_chip, settings.alpha, settings.mean_p, settings.sigma_p, seed);
    assign_core_sections(grid, cores);
    std::vector<double> f0(cores);
    for (std::size_t c = 0; c < cores; ++c) f0[c] = initial_core_frequency(grid, c, settings.k_prime);
    return f0;
}

void write_grid_csv(std::ostream& out, const VariationGrid& grid) {
    out << "i,j,p\n";
    for (std::size_t i = 0; i < grid.n_chip; ++i) {
        for (std::size_t j = 0; j < grid.n_chip; ++j) {
            out << i << ',' << j << ',' << csv::format_double(grid.at(i, j)) << '\n';
        }
    }
}

VariationGrid read_grid_csv(std::istream& in) {
    std::vector<std::string> header;
    std::size_t line = 0;
    if (!csv::read_header(in, header, line) || header != std::vector<std::string>{"i", "j", "p"}) {
        throw ParseError(line, "expected header 'i,j,p'");
    }
    struct Entry {
        std::size_t i, j;
        double p;
    };
    std::vector<Entry> entries;
    std::size_t n = 0;
    csv::Row row;
    while (csv::next_row(in, row, line)) {
        if (row.fields.size() != 3) throw ParseError(row.line, "expected 3 fields");
        const auto i = csv::to_integer(row.fields[0], row.line);
        const auto j = csv::to_integer(row.fields[1], row.line);
        if (i < 0 || j < 0) throw ParseError(row.line, "negative grid index");
        entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                           csv::to_double(row.fields[2], row.line)});
        n = std::max({n, entries.back().i + 1, entries.back().j + 1});
    }
    if (entries.size() != n * n || n == 0) throw ParseError(line, "grid is not square or is incomplete");
    VariationGrid grid;
    grid.n_chip = n;
    grid.cells.assign(n * n, std::numeric_limits<double>::quiet_NaN());
    for (const auto& e : entries) grid.cells[e.i * n + e.j] = e.p;
    for (double v : grid.cells) {
        if (std::isnan(v)) throw ParseError(line, "duplicate or missing grid cell");
    }
    return grid;
}

}  // namespace agingsim::aging
