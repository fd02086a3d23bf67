#include <doctest.h>

#include <cmath>
#include <sstream>

#include "agingsim/aging.hpp"
#include "agingsim/errors.hpp"

using namespace agingsim;
using namespace agingsim::aging;

namespace {

AgingParams calibrated() {
    AgingParams p;
    p.k_fit = calibrate_k(0.3, 10.0 * kSecondsPerYear, p);
    return p;
}

double unit_adf(double temp_k, const AgingParams& p) {
    const double kt = p.boltzmann * temp_k;
    return std::exp(-p.e0 / kt) * std::exp(p.b_field * p.v_dd / (p.t_ox * kt)) * std::pow(p.stress_y, p.n_exp);
}

}  // namespace

TEST_CASE("zero-variance grid has every cell at the mean") {
    const auto g = sample_variation_grid(10, 0.5, 1.0, 0.0, 7);
    REQUIRE(g.cells.size() == 100);
    for (double c : g.cells) CHECK(c == 1.0);
}

TEST_CASE("single-cell grid matches N(1, 0.05^2) over 1e5 seeds") {
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
        const double v = sample_variation_grid(1, 2.0, 1.0, 0.05, static_cast<std::uint64_t>(s)).cells[0];
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean - 1.0) <= 0.001);
    CHECK(sd == doctest::Approx(0.05).epsilon(0.02));
}

TEST_CASE("infinite decay leaves neighbouring cells uncorrelated") {
    const int n = 100000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int s = 0; s < n; ++s) {
        const auto g = sample_variation_grid(2, INFINITY, 0.0, 1.0, static_cast<std::uint64_t>(s));
        const double x = g.cells[0], y = g.cells[1];
        sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
    }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double r = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    CHECK(std::abs(r) < 0.02);
}

TEST_CASE("strong correlation shows up between adjacent cells") {
    const int n = 20000;
    double sxy = 0, sxx = 0;
    for (int s = 0; s < n; ++s) {
        const auto g = sample_variation_grid(2, 0.1, 0.0, 1.0, static_cast<std::uint64_t>(s));
        sxy += g.cells[0] * g.cells[1];
        sxx += g.cells[0] * g.cells[0];
    }
    CHECK(sxy / sxx == doctest::Approx(std::exp(-0.1)).epsilon(0.03));
}

TEST_CASE("grid sampling is deterministic per seed") {
    const auto a = sample_variation_grid(10, 0.5, 1.0, 0.05, 11);
    const auto b = sample_variation_grid(10, 0.5, 1.0, 0.05, 11);
    const auto c = sample_variation_grid(10, 0.5, 1.0, 0.05, 12);
    CHECK(a.cells == b.cells);
    CHECK(a.cells != c.cells);
}

TEST_CASE("core sections tile the grid") {
    auto g = sample_variation_grid(10, 0.5, 1.0, 0.05, 3);
    assign_core_sections(g, 40);
    REQUIRE(g.core_sections.size() == 40);
    for (const auto& s : g.core_sections) CHECK(s.size() == 2);
    assign_core_sections(g, 100);
    for (const auto& s : g.core_sections) CHECK(s.size() == 1);
}

TEST_CASE("initial frequency is k' over the section maximum") {
    VariationGrid g;
    g.n_chip = 2;
    g.cells = {1.0, 1.0, 0.9, 1.1};
    g.core_sections = {{0, 1}, {2, 3}, {3}};
    CHECK(initial_core_frequency(g, 0, 1.0) == 1.0);
    CHECK(initial_core_frequency(g, 1, 1.0) == doctest::Approx(1.0 / 1.1));
    g.cells[3] = 2.0;
    CHECK(initial_core_frequency(g, 2, 3.0) == doctest::Approx(1.5));
    g.cells[3] = -0.1;
    CHECK_THROWS_AS(initial_core_frequency(g, 2, 1.0), ResampleRequired);
}

TEST_CASE("zero-variance cores all sit at nominal frequency") {
    VariationSettings v;
    v.sigma_p = 0.0;
    v.mean_p = 1.25;
    for (double f : sample_core_frequencies(v, 40, 5)) CHECK(f == v.nominal_frequency());
}

TEST_CASE("grid CSV round-trips") {
    const auto g = sample_variation_grid(4, 0.5, 1.0, 0.05, 9);
    std::stringstream ss;
    write_grid_csv(ss, g);
    CHECK(ss.str().rfind("i,j,p\n", 0) == 0);
    const auto back = read_grid_csv(ss);
    CHECK(back.n_chip == 4);
    CHECK(back.cells == g.cells);
}

TEST_CASE("adf follows the documented form") {
    const auto p = calibrated();
    CHECK(adf(CoreState::DeepIdle, p) == 0.0);
    const double t = p.temp_table.active_allocated_k;
    CHECK(adf(CoreState::ActiveAllocated, p) == doctest::Approx(p.k_fit * unit_adf(t, p)).epsilon(1e-14));

    // Sign of dADF/dT is that of E0 - B*Vdd/tox; defaults give a net positive slope.
    const double a_hot = adf(CoreState::ActiveAllocated, p), a_cool = adf(CoreState::ActiveUnallocated, p);
    CHECK((p.e0 - p.b_field * p.v_dd / p.t_ox > 0.0) == (a_hot > a_cool));

    AgingParams q = p;
    q.b_field = 0.2;  // B*Vdd/tox > E0 flips the ordering
    CHECK(adf(CoreState::ActiveAllocated, q) < adf(CoreState::ActiveUnallocated, q));

    AgingParams zero = p;
    zero.k_fit = 0.0;
    CHECK(adf(CoreState::ActiveAllocated, zero) == 0.0);
    CHECK(adf(CoreState::ActiveUnallocated, zero) == 0.0);
}

TEST_CASE("advance_vth recursion") {
    CHECK(advance_vth(0.123, 0.0, 1e9, 1.0 / 6) == 0.123);
    CHECK(advance_vth(0.0, 2e-3, 1000.0, 1.0 / 6) == doctest::Approx(2e-3 * std::pow(1000.0, 1.0 / 6)));
    CHECK_THROWS_AS(advance_vth(0.0, 1e-3, -1.0, 1.0 / 6), std::invalid_argument);

    const double a = 1.7e-3, tau = 12.5;
    double v = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double next = advance_vth(v, a, tau, 1.0 / 6);
        CHECK(next >= v);
        v = next;
    }
    const double closed = a * std::pow(1000 * tau, 1.0 / 6);
    CHECK(std::abs(v - closed) <= 1e-9 * closed);
}

TEST_CASE("core frequency") {
    const AgingParams p;
    CoreAging c;
    c.f0 = 1.0;
    CHECK(core_frequency(c, p) == 1.0);
    c.vth_shift = 0.3 * p.headroom();
    CHECK(core_frequency(c, p) == doctest::Approx(0.7));
    c.f0 = 2.0;
    c.vth_shift = 0.5 * p.headroom();
    CHECK(core_frequency(c, p) == doctest::Approx(1.0));
    c.vth_shift = p.headroom();
    CHECK_THROWS_AS(core_frequency(c, p), EndOfLifeError);
}

TEST_CASE("calibration") {
    const AgingParams base;
    const double life = 10.0 * kSecondsPerYear;
    const double k = calibrate_k(0.3, life, base);
    AgingParams p = base;
    p.k_fit = k;
    CoreAging c;
    apply_state_interval(c, CoreState::ActiveAllocated, life, p);
    CHECK(std::abs((1.0 - core_frequency(c, p)) - 0.3) <= 1e-6 * 0.3);

    CHECK(calibrate_k(0.3, 2 * life, base) == doctest::Approx(k * std::pow(2.0, -base.n_exp)).epsilon(1e-12));
    CHECK(calibrate_k(1e-12, life, base) < 1e-12);
    CHECK_THROWS_AS(calibrate_k(0.0, life, base), ConfigError);
    CHECK_THROWS_AS(calibrate_k(1.0, life, base), ConfigError);
}

TEST_CASE("apply_state_interval halts in deep idle and scales time") {
    const auto p = calibrated();
    CoreAging a, b;
    apply_state_interval(a, CoreState::ActiveUnallocated, 100.0, p);
    const double before = a.vth_shift;
    apply_state_interval(a, CoreState::DeepIdle, 1e6, p);
    CHECK(a.vth_shift == before);
    CHECK(a.last_update == 1e6);
    CHECK_THROWS_AS(apply_state_interval(a, CoreState::DeepIdle, 10.0, p), StateError);

    apply_state_interval(b, CoreState::ActiveAllocated, 1.0, p, 3600.0);
    CoreAging c;
    apply_state_interval(c, CoreState::ActiveAllocated, 3600.0, p);
    CHECK(b.vth_shift == doctest::Approx(c.vth_shift).epsilon(1e-14));
}
