#include <doctest.h>

#include <map>
#include <stdexcept>
#include <vector>

#include "agingsim/metrics.hpp"

using namespace agingsim::metrics;

TEST_CASE("percentiles interpolate linearly") {
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 50) == 2.5);
    CHECK(percentile({5.0}, 99) == 5.0);
    CHECK(percentile({1.0, 2.0, 3.0, 4.0, 5.0}, 90) == doctest::Approx(4.6));
    const std::map<double, std::uint64_t> hist{{1.0, 1}, {2.0, 1}, {3.0, 1}, {4.0, 1}};
    CHECK(percentile(hist, 50) == 2.5);
    const std::map<double, std::uint64_t> skew{{0.0, 3}, {1.0, 1}};
    CHECK(percentile(skew, 90) == percentile(std::vector<double>{0, 0, 0, 1}, 90));
    CHECK_THROWS(percentile(std::vector<double>{}, 50));
}

TEST_CASE("frequency CV") {
    CHECK(frequency_cv(std::vector<double>{1.0, 1.0, 1.0}) == 0.0);
    const std::vector<double> f{1.0, 1.0, 0.8, 1.2};
    CHECK(frequency_cv(f) == doctest::Approx(0.141421).epsilon(1e-5));
    const std::vector<double> scaled{3.0, 3.0, 2.4, 3.6};
    CHECK(frequency_cv(scaled) == doctest::Approx(frequency_cv(f)));
    CHECK_THROWS_AS(frequency_cv(std::vector<double>{0.0, 0.0}), FailedCpuError);
    CHECK_THROWS(frequency_cv(std::vector<double>{1.0}));
}

TEST_CASE("mean degradation") {
    const std::vector<double> f0{1.0, 1.0};
    CHECK(mean_degradation(f0, f0) == 0.0);
    CHECK(mean_degradation(f0, std::vector<double>{0.9, 0.7}) == doctest::Approx(0.2));
    CHECK(mean_degradation(std::vector<double>{1.0}, std::vector<double>{0.7}) == doctest::Approx(0.3));
    CHECK_THROWS(mean_degradation(f0, std::vector<double>{1.0}));
}

TEST_CASE("oversubscription integral") {
    const std::vector<MetricSample> none{{0, 0, 10, 0, 3}, {5, 0, 10, 0, 10}, {9, 0, 10, 0, 0}};
    CHECK(oversubscription_integral(none, 0) == 0.0);
    const std::vector<MetricSample> over{{0, 0, 40, 30, 12}, {5, 0, 40, 30, 0}};
    CHECK(oversubscription_integral(over, 0) == doctest::Approx(10.0));
    CHECK(oversubscription_integral(over, 1) == 0.0);

    // Additive over a split of the same series.
    const std::vector<MetricSample> whole{{0, 0, 4, 2, 5}, {2, 0, 4, 1, 6}, {3, 0, 4, 0, 1}, {7, 0, 4, 0, 0}};
    const std::vector<MetricSample> left(whole.begin(), whole.begin() + 3), right(whole.begin() + 2, whole.end());
    CHECK(oversubscription_integral(whole, 0) ==
          doctest::Approx(oversubscription_integral(left, 0) + oversubscription_integral(right, 0)));

    const std::vector<MetricSample> unordered{{3, 0, 4, 0, 1}, {2, 0, 4, 0, 1}};
    CHECK_THROWS(oversubscription_integral(unordered, 0));
}

TEST_CASE("normalized idle") {
    CHECK(normalized_idle({0, 0, 40, 0, 0}) == 1.0);
    CHECK(normalized_idle({0, 0, 40, 10, 30}) == 0.0);
    CHECK(normalized_idle({0, 0, 40, 0, 44}) == doctest::Approx(-0.1));
    CHECK(normalized_idle({0, 0, 4, 3, 100}) == -1.0);

    const std::vector<MetricSample> s{{0, 0, 40, 0, 0}, {1, 0, 40, 10, 30}, {2, 1, 40, 0, 44}};
    const auto sum = normalized_idle_series(s);
    CHECK(sum.values.size() == 3);
    CHECK(sum.min == doctest::Approx(-0.1));
    CHECK(sum.p50 == 0.0);
}

TEST_CASE("carbon estimator") {
    const CarbonParams p;
    const auto self = estimate_yearly_embodied(0.02, 0.02, p);
    CHECK(self.yearly == 22.0 * 278.3 / 3.0);
    CHECK(self.yearly == doctest::Approx(2040.87).epsilon(1e-5));
    CHECK(self.reduction == 0.0);
    CHECK(estimate_yearly_embodied(0.6233, 1.0, p).reduction == doctest::Approx(0.3767));
    CHECK(estimate_yearly_embodied(0.5099, 1.0, p).reduction == doctest::Approx(0.4901));
    CHECK(estimate_yearly_embodied(0.5, 1.0, p).lifetime == doctest::Approx(6.0));

    CarbonParams other{5.0, 100.0, 3.0};
    CHECK(estimate_yearly_embodied(0.3, 0.6, other).reduction == estimate_yearly_embodied(0.3, 0.6, p).reduction);
    CHECK_THROWS_AS(estimate_yearly_embodied(0.0, 1.0, p), std::domain_error);
}
