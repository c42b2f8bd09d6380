#include <random>

#include "adatm/atm.hpp"
#include "adatm/error.hpp"
#include "doctest.h"

using namespace adatm;
using namespace adatm::atm;

namespace {

Subsector sub(double x0, double y0, double edge = 10) { return {{0, 0}, {x0, y0, x0 + edge, y0 + edge}, 6, 3, {}}; }

} // namespace

TEST_CASE("a storm drifting across a subsector") {
    StormCell s{"S1", {-15, 0, -5, 40}, 0.02, 0, {1000, 8000}};
    auto w = severe_window({10, 0, 20, 40}, s);
    REQUIRE(w);
    CHECK(w->start == doctest::Approx(1750));
    CHECK(w->end == doctest::Approx(2750));

    auto early = severe_window({-20, 0, -10, 40}, s);
    REQUIRE(early);
    CHECK(early->start == 1000);

    StormCell brief = s;
    brief.active = {1000, 2000};
    auto clipped = severe_window({10, 0, 20, 40}, brief);
    REQUIRE(clipped);
    CHECK(clipped->end == 2000);

    CHECK_FALSE(severe_window({10, 50, 20, 60}, s));
    StormCell still{"S2", {0, 0, 5, 5}, 0, 0, {0, 100}};
    CHECK_FALSE(severe_window({5, 0, 10, 5}, still));
    auto w2 = severe_window({4, 4, 10, 10}, still);
    REQUIRE(w2);
    CHECK(w2->start == 0);
    CHECK(w2->end == 100);
}

TEST_CASE("the analytic window matches 1-second sampling") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> pos(-50, 50), vel(-0.05, 0.05), size(1, 20), start(0, 2000), len(10, 3000);
    for (int k = 0; k < 300; ++k) {
        const double x = pos(rng), y = pos(rng);
        StormCell s{"S", {x, y, x + size(rng), y + size(rng)}, vel(rng), vel(rng), {0, 0}};
        s.active.start = std::round(start(rng));
        s.active.end = s.active.start + std::round(len(rng));
        const Subsector area = sub(std::round(pos(rng)), std::round(pos(rng)), 10);
        const std::vector<StormCell> storms{s};
        auto w = severe_window(area.bounds, s);
        for (double t = s.active.start - 50.5; t < s.active.end + 50; t += 1.0) {
            const bool sampled = weather_at(area, t, storms) == Weather::Severe;
            const bool analytic = w && t > w->start && t < w->end;
            if (w && (std::abs(t - w->start) < 1e-6 || std::abs(t - w->end) < 1e-6)) continue;
            CHECK(sampled == analytic);
        }
    }
}

TEST_CASE("capacity at an instant and over a bucket") {
    Subsector a = sub(10, 0);
    const std::vector<StormCell> storms{{"S1", {-15, 0, -5, 40}, 0.02, 0, {1000, 8000}}};
    CHECK(capacity_at(a, 1700, storms) == 6);
    CHECK(capacity_at(a, 1800, storms) == 3);
    CHECK(capacity_at(a, 2800, storms) == 6);

    CHECK(bucket_capacity(a, 1680, 60, storms) == 6);
    CHECK(bucket_capacity(a, 1740, 60, storms) == 3);
    CHECK(bucket_capacity(a, 2700, 60, storms) == 3);
    CHECK(bucket_capacity(a, 2760, 60, storms) == 6);

    a.closed.push_back({3000, 3100});
    CHECK(capacity_at(a, 3050, storms) == 0);
    CHECK(capacity_at(a, 3100, storms) == 6);
    CHECK(bucket_capacity(a, 3060, 60, storms) == 0);
    CHECK(bucket_capacity(a, 3120, 60, storms) == 6);
    CHECK(bucket_capacity(a, 3120, 60, {}) == 6);
}

TEST_CASE("bucket capacity is the minimum over sampled instants") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pos(-30, 30), vel(-0.05, 0.05);
    for (int k = 0; k < 200; ++k) {
        const double x = std::round(pos(rng)), y = std::round(pos(rng));
        std::vector<StormCell> storms{{"S", {x, y, x + 7, y + 9}, vel(rng), vel(rng), {300, 1500}}};
        const Subsector area = sub(0, 0);
        for (double b = 0; b < 1800; b += 60) {
            int lowest = 6;
            for (double t = b + 0.25; t < b + 60; t += 0.5) lowest = std::min(lowest, capacity_at(area, t, storms));
            // Sampling can only miss very short overlaps.
            if (lowest == 3) CHECK(bucket_capacity(area, b, 60, storms) == 3);
        }
    }
}

TEST_CASE("storm validation") {
    CHECK_THROWS_AS((StormCell{"", {0, 0, 1, 1}, 0, 0, {0, 1}}.validate()), ValidationError);
    CHECK_THROWS_AS((StormCell{"S", {0, 0, 0, 1}, 0, 0, {0, 1}}.validate()), ValidationError);
    CHECK_THROWS_AS((StormCell{"S", {0, 0, 1, 1}, 0, 0, {2, 1}}.validate()), ValidationError);
    CHECK_NOTHROW((StormCell{"S", {0, 0, 1, 1}, 0.1, 0, {0, 1}}.validate()));
    StormCell s{"S", {0, 0, 1, 1}, 1, 2, {10, 20}};
    CHECK(s.box_at(15) == PlanarBox{5, 10, 6, 11});
}
