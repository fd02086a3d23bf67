#include <doctest.h>

#include <cmath>
#include <vector>

#include "agingsim/errors.hpp"
#include "agingsim/policy.hpp"

using namespace agingsim;
using namespace agingsim::policy;

namespace {

std::vector<ManagedCore> cores(std::size_t n) {
    std::vector<ManagedCore> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].core_id = i;
    return out;
}

}  // namespace

TEST_CASE("idle history keeps the eight most recent intervals") {
    IdleHistory h;
    CHECK(h.sum() == 0.0);
    for (int i = 1; i <= 10; ++i) h.push(i);
    CHECK(h.size() == 8);
    CHECK(h.sum() == doctest::Approx(3 + 4 + 5 + 6 + 7 + 8 + 9 + 10));
    CHECK(h.values() == std::vector<double>{3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("idle transitions open and close intervals") {
    ManagedCore c;
    record_idle_transition(c, IdleEvent::BecameIdle, 1.0);
    CHECK_THROWS_AS(record_idle_transition(c, IdleEvent::BecameIdle, 2.0), StateError);
    record_idle_transition(c, IdleEvent::TaskAssigned, 4.0);
    CHECK(c.idle_history.sum() == 3.0);
    CHECK_FALSE(c.idle_open_since.has_value());
    CHECK_THROWS_AS(record_idle_transition(c, IdleEvent::TaskAssigned, 5.0), StateError);
}

TEST_CASE("select_core prefers the longest idle record including the open interval") {
    auto cs = cores(3);
    cs[0].idle_history.push(5.0);
    cs[1].idle_history.push(2.0);
    cs[1].idle_open_since = 0.0;
    CHECK(idle_score(cs[1], 4.0) == 6.0);
    CHECK(select_core(cs, 4.0) == 1u);
    CHECK(select_core(cs, 2.0) == 0u);  // 5 > 4
    CHECK(select_core(cs, 3.0) == 0u);  // tie 5 == 5: first wins
}

TEST_CASE("select_core skips busy, sleeping and failed cores") {
    auto cs = cores(4);
    cs[0].assigned_task = 1;
    cs[1].idle_state = IdleState::DeepIdle;
    cs[1].idle_history.push(100.0);
    cs[2].failed = true;
    cs[2].idle_history.push(100.0);
    CHECK(select_core(cs, 0.0) == 3u);
    cs[3].assigned_task = 2;
    CHECK_FALSE(select_core(cs, 0.0).has_value());
}

TEST_CASE("reaction function") {
    CHECK(reaction(0.0) == 0.0);
    CHECK(reaction(1.0) == doctest::Approx(0.99920).epsilon(1e-4));
    CHECK(reaction(-1.0) == doctest::Approx(-0.99783).epsilon(1e-4));
    CHECK(reaction(0.5) == doctest::Approx(std::tan(0.3925)));
    CHECK(reaction(-0.125) == doctest::Approx(std::atan(-0.19375)));
    CHECK_THROWS_AS(reaction(1.0001), std::invalid_argument);
    CHECK_THROWS_AS(reaction(-1.5), std::invalid_argument);
    double prev = reaction(-1.0);
    for (int i = -999; i <= 1000; ++i) {
        const double y = reaction(i * 1e-3);
        CHECK(y > prev);
        prev = y;
    }
    // The oversubscription branch is steeper near the origin.
    for (int i = 1; i <= 990; ++i) CHECK(std::abs(reaction(-i * 1e-3)) > std::abs(reaction(i * 1e-3)));
}

TEST_CASE("underutilised machine idles the most-aged free cores") {
    auto cs = cores(40);
    for (std::size_t i = 0; i < 40; ++i) cs[i].age_estimate = static_cast<double>((i * 7) % 40);
    for (std::size_t i = 0; i < 20; ++i) cs[i].assigned_task = i;
    const auto d = adjust_sleeping_cores(cs, 0, ReactionParams{});
    CHECK(d.total == 40);
    CHECK(d.sleeping == 0);
    CHECK(d.tasks == 20);
    CHECK(d.error == 0.5);
    CHECK(d.response == doctest::Approx(0.41398).epsilon(1e-4));
    CHECK(d.correction == 16);
    REQUIRE(d.transitions.size() == 16);
    for (std::size_t k = 0; k < 16; ++k) {
        const auto& c = cs[d.transitions[k].core_id];
        CHECK_FALSE(c.assigned_task.has_value());
        CHECK(d.transitions[k].new_state == IdleState::DeepIdle);
        if (k > 0) CHECK(cs[d.transitions[k - 1].core_id].age_estimate >= c.age_estimate);
    }
}

TEST_CASE("oversubscribed machine wakes the least-aged sleeping cores") {
    auto cs = cores(40);
    for (std::size_t i = 0; i < 40; ++i) {
        cs[i].age_estimate = static_cast<double>((i * 13) % 40);
        if (i < 10) cs[i].assigned_task = i;
        else cs[i].idle_state = IdleState::DeepIdle;
    }
    const auto d = adjust_sleeping_cores(cs, 5, ReactionParams{});
    CHECK(d.sleeping == 30);
    CHECK(d.tasks == 15);
    CHECK(d.error == -0.125);
    CHECK(d.response == doctest::Approx(-0.19138).epsilon(1e-4));
    CHECK(d.correction == -7);
    REQUIRE(d.transitions.size() == 7);
    for (std::size_t k = 0; k < 7; ++k) {
        CHECK(d.transitions[k].new_state == IdleState::Active);
        CHECK(cs[d.transitions[k].core_id].idle_state == IdleState::DeepIdle);
        if (k > 0) CHECK(cs[d.transitions[k - 1].core_id].age_estimate <= cs[d.transitions[k].core_id].age_estimate);
    }
}

TEST_CASE("balanced machine is left alone and equal ages break by core id") {
    auto cs = cores(40);
    for (std::size_t i = 0; i < 10; ++i) cs[i].assigned_task = i;
    for (std::size_t i = 10; i < 40; ++i) cs[i].idle_state = IdleState::DeepIdle;
    const auto d = adjust_sleeping_cores(cs, 0, ReactionParams{});
    CHECK(d.error == 0.0);
    CHECK(d.correction == 0);
    CHECK(d.transitions.empty());

    auto fresh = cores(40);
    const auto first = adjust_sleeping_cores(fresh, 0, ReactionParams{});
    CHECK(first.correction == 39);
    REQUIRE(first.transitions.size() == 39);
    for (std::size_t k = 0; k < 39; ++k) CHECK(first.transitions[k].core_id == k);
}

TEST_CASE("task count is capped at N and deficits beyond the sleeping pool are clipped") {
    auto cs = cores(4);
    for (std::size_t i = 0; i < 4; ++i) cs[i].assigned_task = i;
    const auto d = adjust_sleeping_cores(cs, 100, ReactionParams{});
    CHECK(d.tasks == 4);
    CHECK(d.error == 0.0);

    auto one = cores(4);
    one[0].assigned_task = 0;
    for (std::size_t i = 1; i < 4; ++i) one[i].idle_state = IdleState::DeepIdle;
    const auto w = adjust_sleeping_cores(one, 50, ReactionParams{});
    CHECK(w.error == -0.75);
    CHECK(w.correction == static_cast<long long>(4 * std::atan(1.55 * -0.75)));
    CHECK(w.transitions.size() == 3);
}
