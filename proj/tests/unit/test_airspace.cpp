#include <algorithm>
#include <functional>
#include <random>
#include <set>

#include "adatm/airspace.hpp"
#include "adatm/error.hpp"
#include "doctest.h"

using namespace adatm;
using namespace adatm::atm;

namespace {

const GridSpec kGrid{0, 0, 4, 4, 10, 2, 2};

FlightPlan resident(int i, double t0 = 0, std::optional<double> max_delay = std::nullopt) {
    return {"R" + std::to_string(i),
            {{2, 12.0 + i, t0 + 10.0 * i}, {38, 12.0 + i, t0 + 1800 + 10.0 * i}},
            {},
            0,
            i + 1,
            max_delay};
}

FlightPlan crossing(std::optional<double> max_delay = std::nullopt) {
    return {"3412", {{15, 1, 60}, {15, 39, 1860}}, {}, 0, 0, max_delay};
}

AirspaceState with_residents(int n, std::optional<double> max_delay = std::nullopt) {
    AirspaceState s(kGrid, AirspaceConfig{});
    for (int i = 1; i <= n; ++i) REQUIRE(try_insert(s, resident(i, 0, max_delay)).kind == InsertOutcome::Kind::Accepted);
    return s;
}

// Occupancy recomputed from scratch out of every flight's segments.
std::map<CellBucket, int> recount(const AirspaceState& s) {
    std::map<CellBucket, int> occ;
    for (const auto& [id, f] : s.flights())
        for (const auto& cb : cell_buckets(f.segments, s.config().bucket_seconds)) ++occ[cb];
    return occ;
}

} // namespace

TEST_CASE("changed segment count is a symmetric difference") {
    std::vector<TrajectorySegment> a{{"F", {0, 0}, 0, 10, 0}, {"F", {1, 0}, 10, 20, 0}};
    std::vector<TrajectorySegment> b{{"F", {0, 0}, 0, 10, 1}, {"F", {1, 1}, 10, 20, 1}};
    CHECK(changed_segment_count(a, a) == 0);
    CHECK(changed_segment_count(a, b) == 2);
    CHECK(changed_segment_count(a, {}) == 2);
}

TEST_CASE("cell buckets cover every bucket a segment touches") {
    std::vector<TrajectorySegment> segs{{"F", {0, 0}, 50, 130, 0}, {"F", {1, 0}, 130, 180, 0}};
    auto cbs = cell_buckets(segs, 60);
    std::vector<CellBucket> expected{{{0, 0}, 0}, {{0, 0}, 60}, {{0, 0}, 120}, {{1, 0}, 120}};
    CHECK(cbs == expected);
}

TEST_CASE("occupancy index matches a recount") {
    auto s = with_residents(4);
    CHECK(s.occupancy_index().size() == recount(s).size());
    for (const auto& [cb, ids] : s.occupancy_index()) CHECK(static_cast<int>(ids.size()) == recount(s)[cb]);
    CHECK(s.occupancy({1, 1}, 480) == 4);
    CHECK(s.occupants({{1, 1}, 480}) == std::vector<std::string>{"R1", "R2", "R3", "R4"});
    s.remove_flight("R2");
    CHECK(s.occupancy({1, 1}, 480) == 3);
    CHECK_THROWS_AS(s.remove_flight("R2"), NotFoundError);
    CHECK_THROWS_AS(s.subsector({9, 9}), DomainError);
}

TEST_CASE("insertion cases") {
    SUBCASE("room to spare") {
        auto s = with_residents(4);
        auto cls = classify_insert(s, segment_trajectory(crossing(), kGrid));
        CHECK(cls.kind == InsertCase::Case1);
        CHECK(try_insert(s, crossing()).kind == InsertOutcome::Kind::Accepted);
        CHECK(s.occupancy({1, 1}, 480) == 5);
    }
    SUBCASE("a full subsector") {
        auto s = with_residents(6, 0.0);
        auto cls = classify_insert(s, segment_trajectory(crossing(0.0), kGrid));
        CHECK(cls.kind == InsertCase::Case2);
        REQUIRE_FALSE(cls.conflicts.empty());
        CHECK(cls.conflicts.front() == CellBucket{{1, 1}, 480});
        auto out = try_insert(s, crossing(0.0));
        CHECK(out.kind == InsertOutcome::Kind::Rejected);
        CHECK(out.violated == CellBucket{{1, 1}, 480});
        CHECK(out.reason == "Case2: no feasible resolution at subsector (1,1) bucket 480");
        CHECK_FALSE(s.has_flight("3412"));
        CHECK(s.occupancy({1, 1}, 480) == 6);
    }
    SUBCASE("a closed subsector") {
        auto s = with_residents(0);
        s.close({1, 2}, {0, 100000});
        auto cls = classify_insert(s, segment_trajectory(crossing(0.0), kGrid));
        CHECK(cls.kind == InsertCase::Case3);
        CHECK(try_insert(s, crossing(0.0)).kind == InsertOutcome::Kind::Rejected);
    }
    SUBCASE("duplicate ids") {
        auto s = with_residents(1);
        CHECK_THROWS_AS(try_insert(s, resident(1)), ConflictError);
    }
}

TEST_CASE("an alternate route avoids the full subsector") {
    auto s = with_residents(6, 0.0);
    auto plan = crossing(0.0);
    plan.alternates.push_back({{15, 1, 60}, {15, 9.5, 1000}, {15, 39, 1860}});
    auto out = try_insert(s, plan);
    CHECK(out.kind == InsertOutcome::Kind::Rerouted);
    CHECK(out.changed_flights == std::vector<std::string>{"3412"});
    REQUIRE(out.new_plans.size() == 1);
    CHECK(out.new_plans[0].waypoints == plan.alternates[0]);
    CHECK(s.flight("3412").route == 0);
    CHECK(s.flight("3412").version == 1);
    for (const auto& [cb, ids] : s.occupancy_index()) CHECK(static_cast<int>(ids.size()) <= s.capacity(cb));
}

TEST_CASE("a delay resolves the conflict when allowed") {
    auto s = with_residents(6, 0.0);
    auto out = try_insert(s, crossing());
    CHECK(out.kind == InsertOutcome::Kind::Rerouted);
    CHECK(out.changed_flights == std::vector<std::string>{"3412"});
    CHECK(s.flight("3412").delay > 0);
    for (const auto& [cb, ids] : s.occupancy_index()) CHECK(static_cast<int>(ids.size()) <= s.capacity(cb));
}

TEST_CASE("a resident is rerouted when that is the cheaper change") {
    AirspaceState s(kGrid, AirspaceConfig{});
    for (int i = 1; i <= 6; ++i) {
        auto r = resident(i, 0, 0.0);
        if (i == 6) r.alternates.push_back({{2, 18, 60}, {2, 5, 300}, {38, 5, 1500}, {38, 18, 1860}});
        REQUIRE(try_insert(s, r).kind == InsertOutcome::Kind::Accepted);
    }
    const auto r6_alt = segment_route(s.flight("R6").requested.alternates[0], 0, kGrid, "R6", 1);
    const std::size_t r6_cost = changed_segment_count(s.flight("R6").segments, r6_alt);

    SUBCASE("only the resident can move") {
        auto out = try_insert(s, crossing(0.0));
        CHECK(out.kind == InsertOutcome::Kind::Rerouted);
        CHECK(out.changed_flights == std::vector<std::string>{"R6"});
        CHECK(s.flight("R6").route == 0);
        CHECK(s.flight("R6").version == 1);
        CHECK(s.flight("3412").version == 0);
        CHECK(out.reason == "Case2: resolved with " + std::to_string(r6_cost) + " changed segments");
    }
    SUBCASE("the arriving flight has a cheaper alternate") {
        auto plan = crossing(0.0);
        plan.alternates.push_back({{15, 1, 60}, {15, 9.5, 1000}, {15, 39, 1860}});
        const std::size_t own = changed_segment_count(segment_trajectory(plan, kGrid),
                                                      segment_route(plan.alternates[0], 0, kGrid, "3412", 1));
        REQUIRE(own < r6_cost);
        auto out = try_insert(s, plan);
        CHECK(out.changed_flights == std::vector<std::string>{"3412"});
        CHECK(s.flight("R6").route == -1);
    }
}

TEST_CASE("en-route flights are never changed") {
    auto s = with_residents(6);
    s.set_now(100);
    auto plan = crossing(0.0);
    plan.waypoints = {{15, 1, 160}, {15, 39, 1960}};
    auto out = try_insert(s, plan);
    CHECK(out.kind == InsertOutcome::Kind::Rejected);
    for (int i = 1; i <= 6; ++i) CHECK(s.flight("R" + std::to_string(i)).delay == 0);
}

TEST_CASE("negotiation matches a brute-force search") {
    std::mt19937 rng(314);
    const GridSpec g{0, 0, 3, 3, 10, 1, 1};
    AirspaceConfig cfg;
    cfg.calm_capacity = 2;
    cfg.severe_capacity = 1;
    cfg.delay_menu = {60, 120};
    std::uniform_real_distribution<double> coord(0.5, 29.5), start(0, 300), len(100, 400);
    std::uniform_int_distribution<int> rank(0, 3), coin(0, 2);

    auto random_plan = [&](const std::string& id) {
        const double t0 = std::round(start(rng));
        const double t1 = t0 + std::round(len(rng));
        FlightPlan p{id, {{coord(rng), coord(rng), t0}, {coord(rng), coord(rng), t1}}, {}, 0, rank(rng), std::nullopt};
        if (coin(rng) == 0)
            p.alternates.push_back(
                {p.waypoints[0], {coord(rng), coord(rng), (t0 + t1) / 2}, p.waypoints[1]});
        if (coin(rng) == 0) p.max_delay = 60;
        return p;
    };

    int compared = 0, resolved = 0;
    for (int trial = 0; trial < 400; ++trial) {
        AirspaceState s(g, cfg);
        for (int i = 0; i < 6; ++i) s.add_flight(random_plan("F" + std::to_string(i)), -1, 0, 0);
        const FlightPlan arriving = random_plan("N");
        const auto segs = segment_trajectory(arriving, g);
        const auto cls = classify_insert(s, segs);
        if (cls.kind != InsertCase::Case2) continue;
        ++compared;

        std::set<std::string> involved{"N"};
        for (const auto& cb : cls.conflicts)
            for (const auto& id : s.occupants(cb)) involved.insert(id);
        const std::vector<std::string> ids(involved.begin(), involved.end());

        // Every option per flight as (route, total delay); index 0 keeps the plan.
        auto options_of = [&](const FlightPlan& p, int route, double delay) {
            std::vector<std::pair<int, double>> out{{route, delay}};
            for (int r = -1; r < static_cast<int>(p.alternates.size()); ++r)
                if (r != route) out.emplace_back(r, delay);
            for (double d : cfg.delay_menu)
                if (!p.max_delay || delay + d <= *p.max_delay) out.emplace_back(route, delay + d);
            return out;
        };
        std::vector<FlightPlan> plans;
        std::vector<std::vector<std::pair<int, double>>> opts;
        for (const auto& id : ids) {
            if (id == "N") {
                plans.push_back(arriving);
                opts.push_back(options_of(arriving, -1, 0));
            } else {
                const auto& f = s.flight(id);
                plans.push_back(f.requested);
                opts.push_back(options_of(f.requested, f.route, f.delay));
            }
        }

        const auto before = recount(s);
        struct Best {
            std::size_t cost;
            std::size_t changed;
            std::vector<int> ranks;
            std::vector<std::string> ids;
            auto operator<=>(const Best&) const = default;
        };
        std::optional<Best> best;
        std::vector<std::size_t> pick(ids.size(), 0);
        std::function<void(std::size_t)> enumerate = [&](std::size_t i) {
            if (i == ids.size()) {
                std::size_t changed = 0;
                for (auto p : pick) changed += p != 0;
                if (changed > cfg.max_changed_flights) return;
                AirspaceState t = s;
                Best b{0, changed, {}, {}};
                for (std::size_t k = 0; k < ids.size(); ++k) {
                    const auto [route, delay] = opts[k][pick[k]];
                    auto base = ids[k] == "N" ? segment_route(arriving.waypoints, 0, g, "N") : s.flight(ids[k]).segments;
                    if (ids[k] != "N") t.remove_flight(ids[k]);
                    t.add_flight(plans[k], route, delay, 0);
                    if (pick[k] != 0) {
                        b.cost += changed_segment_count(base, t.flight(ids[k]).segments);
                        b.ranks.push_back(plans[k].priority_rank);
                        b.ids.push_back(ids[k]);
                    }
                }
                std::sort(b.ranks.rbegin(), b.ranks.rend());
                const auto after = recount(t);
                for (const auto& [cb, n] : after) {
                    const int was = before.contains(cb) ? before.at(cb) : 0;
                    if (n > was && n > t.capacity(cb)) return;
                }
                for (const auto& cb : cls.conflicts)
                    if ((after.contains(cb) ? after.at(cb) : 0) > t.capacity(cb)) return;
                if (!best || b < *best) best = b;
                return;
            }
            for (std::size_t o = 0; o < opts[i].size(); ++o) {
                pick[i] = o;
                enumerate(i + 1);
            }
            pick[i] = 0;
        };
        enumerate(0);

        const auto res = negotiate(s, cls.conflicts, &arriving);
        REQUIRE(res.has_value() == best.has_value());
        if (!res) continue;
        ++resolved;
        std::vector<std::string> changed_ids;
        std::vector<int> ranks;
        for (const auto& ch : res->changes) {
            changed_ids.push_back(ch.flight_id);
            for (std::size_t k = 0; k < ids.size(); ++k)
                if (ids[k] == ch.flight_id) ranks.push_back(plans[k].priority_rank);
        }
        std::sort(ranks.rbegin(), ranks.rend());
        CHECK(res->total_changed_segments == best->cost);
        CHECK(res->changes.size() == best->changed);
        CHECK(ranks == best->ranks);
        CHECK(changed_ids == best->ids);
        for (const auto& id : changed_ids) CHECK(involved.contains(id));

        AirspaceState applied = s;
        apply_resolution(applied, *res, &arriving);
        CHECK(applied.has_flight("N"));
        for (const auto& cb : cls.conflicts) CHECK(applied.occupancy(cb.cell, cb.bucket_start) <= applied.capacity(cb));
    }
    CHECK(compared > 50);
    CHECK(resolved > 10);
}

TEST_CASE("storm reveal lowers capacity and the weather reaction restores it") {
    AirspaceState s(kGrid, AirspaceConfig{});
    for (int i = 1; i <= 4; ++i) {
        auto r = resident(i, 1500);
        r.flight_id = "W" + std::to_string(i);
        REQUIRE(try_insert(s, r).kind == InsertOutcome::Kind::Accepted);
    }
    s.add_storm({"S1", {-15, 0, -5, 40}, 0.02, 0, {1000, 8000}});
    CHECK(s.known_storms().empty());
    CHECK(s.pending_reveals() == std::vector<double>{1000});
    CHECK(s.overloaded({1, 1}).empty());

    auto events = advance_weather(s, 1000);
    REQUIRE_FALSE(events.empty());
    CHECK(events[0].type == EventType::StormRevealed);
    CHECK(events[0].datum_id == "S1");
    std::set<std::string> flights;
    for (const auto& e : events) {
        if (e.type != EventType::WeatherChanged) continue;
        CHECK(e.datum_id.starts_with("seg/W"));
        flights.insert(e.datum_id.substr(4, 2));
    }
    CHECK(flights == std::set<std::string>{"W1", "W2", "W3", "W4"});
    CHECK(s.pending_reveals().empty());

    auto conflicts = s.overloaded({1, 1});
    REQUIRE_FALSE(conflicts.empty());
    auto reaction = react_to_weather(s, {1, 1});
    REQUIRE(reaction.resolution);
    CHECK(reaction.withdrawn.empty());
    CHECK(s.overloaded({1, 1}).empty());
    for (const auto& [cb, ids] : s.occupancy_index())
        if (cb.bucket_start + 60 > 1000) CHECK(static_cast<int>(ids.size()) <= s.capacity(cb));
    CHECK(react_to_weather(s, {1, 1}).conflicts.empty());
    CHECK_THROWS_AS(advance_weather(s, 500), PreconditionError);
}

TEST_CASE("flights are withdrawn when nothing feasible exists") {
    AirspaceConfig cfg;
    AirspaceState s(kGrid, cfg);
    for (int i = 1; i <= 4; ++i) {
        auto r = resident(i, 1500, 0.0);
        r.flight_id = "W" + std::to_string(i);
        REQUIRE(try_insert(s, r).kind == InsertOutcome::Kind::Accepted);
    }
    s.add_storm({"S1", {-15, 0, -5, 40}, 0.02, 0, {1000, 8000}});
    advance_weather(s, 1000);
    auto reaction = react_to_weather(s, {1, 1});
    CHECK_FALSE(reaction.resolution);
    REQUIRE(reaction.withdrawn.size() == 1);
    CHECK(reaction.withdrawn[0].first == "W1");
    CHECK_FALSE(s.has_flight("W1"));
    CHECK(s.overloaded({1, 1}).empty());
}

TEST_CASE("congestion prediction") {
    auto s = with_residents(6);
    s.add_flight(crossing(), -1, 0, 0);
    auto sparse = predict_congestion(s, 0, 14400);
    auto full = predict_congestion(s, 0, 14400, true);
    CHECK(full.size() == 16u * 240u);
    std::size_t congested = 0;
    for (const auto& r : sparse) {
        CHECK(r.occupancy > 0);
        CHECK(r.occupancy == static_cast<int>(r.flight_ids.size()));
        congested += r.congested();
    }
    CHECK(congested == 8);
    std::size_t nonzero = 0;
    for (const auto& r : full) nonzero += r.occupancy > 0;
    CHECK(nonzero == sparse.size());
    CHECK(std::is_sorted(sparse.begin(), sparse.end(), [](const CongestionRecord& a, const CongestionRecord& b) {
        return CellBucket{a.cell, a.bucket_start} < CellBucket{b.cell, b.bucket_start};
    }));
    auto late = predict_congestion(s, 1000, 60);
    for (const auto& r : late) CHECK(r.bucket_start >= 960);
    CHECK_THROWS_AS(predict_congestion(s, 0, 0), PreconditionError);
}
