#include "adatm/airspace.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <functional>

#include "adatm/error.hpp"
#include "adatm/format.hpp"

namespace adatm::atm {

std::string describe(const CellBucket& cb) {
    return "subsector (" + std::to_string(cb.cell.col) + "," + std::to_string(cb.cell.row) + ") bucket " +
           std::to_string(cb.bucket_start);
}

void AirspaceConfig::validate() const {
    if (bucket_seconds <= 0) throw ValidationError("bucket_seconds must be positive");
    if (!(horizon_seconds > 0)) throw ValidationError("horizon_seconds must be positive");
    if (calm_capacity < 0 || severe_capacity < 0) throw ValidationError("capacities must be >= 0");
    if (severe_capacity > calm_capacity) throw ValidationError("severe capacity exceeds calm capacity");
    for (double d : delay_menu)
        if (!(d > 0)) throw ValidationError("delay menu entries must be positive");
}

std::string_view to_string(InsertCase c) {
    switch (c) {
    case InsertCase::Case1: return "Case1";
    case InsertCase::Case2: return "Case2";
    case InsertCase::Case3: return "Case3";
    }
    return "?";
}

std::string_view to_string(InsertOutcome::Kind k) {
    switch (k) {
    case InsertOutcome::Kind::Accepted: return "Accepted";
    case InsertOutcome::Kind::Rerouted: return "Rerouted";
    case InsertOutcome::Kind::Rejected: return "Rejected";
    }
    return "?";
}

std::size_t changed_segment_count(std::span<const TrajectorySegment> before,
                                  std::span<const TrajectorySegment> after) {
    auto unmatched = [](std::span<const TrajectorySegment> from, std::span<const TrajectorySegment> in) {
        return static_cast<std::size_t>(std::count_if(from.begin(), from.end(), [&](const TrajectorySegment& s) {
            return std::none_of(in.begin(), in.end(), [&](const TrajectorySegment& o) { return s.same_span(o); });
        }));
    };
    return unmatched(before, after) + unmatched(after, before);
}

std::vector<CellBucket> cell_buckets(std::span<const TrajectorySegment> segments, std::int64_t bucket_seconds) {
    std::set<CellBucket> out;
    const double b = static_cast<double>(bucket_seconds);
    for (const auto& s : segments) {
        auto bucket = static_cast<std::int64_t>(std::floor(s.entry / b)) * bucket_seconds;
        for (; static_cast<double>(bucket) < s.exit; bucket += bucket_seconds) out.insert({s.cell, bucket});
    }
    return {out.begin(), out.end()};
}

// --- AirspaceState --------------------------------------------------------

FlightPlan AirspaceState::FlightEntry::effective() const {
    FlightPlan p = requested;
    p.waypoints = requested.route(route);
    p.departure_delay = delay;
    return p;
}

AirspaceState::AirspaceState(GridSpec grid, AirspaceConfig config) : grid_(grid), config_(std::move(config)) {
    grid_.validate();
    config_.validate();
    for (const auto& c : grid_.cells())
        subsectors_.push_back(Subsector{c, grid_.bounds(c), config_.calm_capacity, config_.severe_capacity, {}});
}

const Subsector& AirspaceState::subsector(CellIndex c) const {
    if (!grid_.valid(c))
        throw DomainError("no subsector (" + std::to_string(c.col) + "," + std::to_string(c.row) + ")");
    return subsectors_[static_cast<std::size_t>(c.col) * static_cast<std::size_t>(grid_.rows) +
                       static_cast<std::size_t>(c.row)];
}

void AirspaceState::close(CellIndex c, TimeInterval interval) {
    interval.validate();
    const_cast<Subsector&>(subsector(c)).closed.push_back(interval);
}

void AirspaceState::add_storm(StormCell storm) {
    storm.validate();
    for (const auto& s : storms_)
        if (s.id == storm.id) throw ConflictError("storm id already exists: " + storm.id);
    storms_.push_back(std::move(storm));
}

std::vector<StormCell> AirspaceState::known_storms() const {
    std::vector<StormCell> out;
    for (const auto& s : storms_)
        if (s.active.start <= now_) out.push_back(s);
    return out;
}

std::vector<double> AirspaceState::pending_reveals() const {
    std::set<double> times;
    for (const auto& s : storms_)
        if (s.active.start > now_) times.insert(s.active.start);
    return {times.begin(), times.end()};
}

const AirspaceState::FlightEntry& AirspaceState::flight(const std::string& id) const {
    auto it = flights_.find(id);
    if (it == flights_.end()) throw NotFoundError("unknown flight " + id);
    return it->second;
}

bool AirspaceState::en_route(const FlightEntry& f) const noexcept {
    return !f.segments.empty() && f.segments.front().entry < now_;
}

int AirspaceState::occupancy(CellIndex c, std::int64_t bucket_start) const {
    auto it = occupancy_.find(CellBucket{c, bucket_start});
    return it == occupancy_.end() ? 0 : static_cast<int>(it->second.size());
}

std::vector<std::string> AirspaceState::occupants(const CellBucket& cb) const {
    auto it = occupancy_.find(cb);
    if (it == occupancy_.end()) return {};
    return {it->second.begin(), it->second.end()};
}

int AirspaceState::capacity(const CellBucket& cb) const {
    const auto storms = known_storms();
    return bucket_capacity(subsector(cb.cell), static_cast<double>(cb.bucket_start),
                           static_cast<double>(config_.bucket_seconds), storms);
}

std::vector<CellBucket> AirspaceState::overloaded(CellIndex cell) const {
    std::vector<CellBucket> out;
    for (const auto& [cb, ids] : occupancy_) {
        if (cb.cell != cell) continue;
        if (static_cast<double>(cb.bucket_start + config_.bucket_seconds) <= now_) continue;
        if (static_cast<int>(ids.size()) > capacity(cb)) out.push_back(cb);
    }
    return out;
}

void AirspaceState::index_segments(const std::string& id, std::span<const TrajectorySegment> segs, int delta) {
    for (const auto& cb : cell_buckets(segs, config_.bucket_seconds)) {
        if (delta > 0) {
            occupancy_[cb].insert(id);
        } else {
            auto it = occupancy_.find(cb);
            it->second.erase(id);
            if (it->second.empty()) occupancy_.erase(it);
        }
    }
}

void AirspaceState::add_flight(const FlightPlan& requested, int route, double delay, int version) {
    if (flights_.contains(requested.flight_id)) throw ConflictError("flight already present: " + requested.flight_id);
    FlightEntry entry{requested, route, delay, version, {}};
    entry.segments = segment_route(requested.route(route), delay, grid_, requested.flight_id, version);
    index_segments(requested.flight_id, entry.segments, +1);
    flights_.emplace(requested.flight_id, std::move(entry));
}

void AirspaceState::remove_flight(const std::string& id) {
    auto it = flights_.find(id);
    if (it == flights_.end()) throw NotFoundError("unknown flight " + id);
    index_segments(id, it->second.segments, -1);
    flights_.erase(it);
}

std::string AirspaceState::segment_datum_id(const std::string& flight_id, int version, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return "seg/" + flight_id + "/v" + std::to_string(version) + "/" + buf;
}

// --- insertion protocol ---------------------------------------------------

InsertClassification classify_insert(const AirspaceState& state, std::span<const TrajectorySegment> segments) {
    InsertClassification out;
    if (segments.empty()) return out;
    const std::string& id = segments.front().flight_id;
    std::vector<CellBucket> violations, conflicts;
    for (const auto& cb : cell_buckets(segments, state.config().bucket_seconds)) {
        const int cap = state.capacity(cb);
        if (cap == 0) {
            violations.push_back(cb);
            continue;
        }
        auto occupants = state.occupants(cb);
        int occ = static_cast<int>(occupants.size());
        if (std::binary_search(occupants.begin(), occupants.end(), id)) --occ;
        if (occ + 1 > cap) conflicts.push_back(cb);
    }
    if (!violations.empty()) {
        out.kind = InsertCase::Case3;
        out.conflicts = std::move(violations);
    } else if (!conflicts.empty()) {
        out.kind = InsertCase::Case2;
        out.conflicts = std::move(conflicts);
    }
    return out;
}

namespace {

struct Option {
    FlightOption option;
    int route = -1;
    double total_delay = 0.0;
    std::vector<TrajectorySegment> segments;
    std::vector<CellBucket> cbs;
    std::size_t cost = 0;
};

struct Candidate {
    std::string id;
    int rank = 0;
    bool in_state = false;
    std::vector<TrajectorySegment> base;
    std::vector<CellBucket> base_cbs;
    std::vector<Option> options;
};

struct Score {
    std::size_t cost = 0;
    std::size_t changed = 0;
    std::vector<int> ranks;          // descending
    std::vector<std::string> ids;    // ascending
    std::vector<int> choice;

    friend auto operator<=>(const Score&, const Score&) = default;
};

Candidate make_candidate(const AirspaceState& state, const FlightPlan& requested, int route, double delay,
                         int version, bool in_state, bool may_change) {
    const auto& grid = state.grid();
    const auto bucket = state.config().bucket_seconds;
    Candidate c;
    c.id = requested.flight_id;
    c.rank = requested.priority_rank;
    c.in_state = in_state;
    c.base = segment_route(requested.route(route), delay, grid, c.id, version);
    c.base_cbs = cell_buckets(c.base, bucket);
    if (!may_change) return c;

    auto add = [&](FlightOption opt, int r, double total) {
        Option o{opt, r, total, segment_route(requested.route(r), total, grid, c.id, version + 1), {}, 0};
        o.cbs = cell_buckets(o.segments, bucket);
        o.cost = changed_segment_count(c.base, o.segments);
        c.options.push_back(std::move(o));
    };
    for (int r = -1; r < static_cast<int>(requested.alternates.size()); ++r)
        if (r != route) add({FlightOption::Kind::Alternate, r, 0.0}, r, delay);
    for (double d : state.config().delay_menu) {
        const double total = delay + d;
        if (requested.max_delay && total > *requested.max_delay) continue;
        add({FlightOption::Kind::Delay, route, d}, route, total);
    }
    return c;
}

} // namespace

std::optional<Resolution> negotiate(const AirspaceState& state, std::span<const CellBucket> conflicts,
                                    const FlightPlan* arriving) {
    if (conflicts.empty()) throw PreconditionError("negotiation needs at least one conflict");

    std::set<std::string> involved;
    for (const auto& cb : conflicts)
        for (auto& id : state.occupants(cb)) involved.insert(std::move(id));
    if (arriving) involved.insert(arriving->flight_id);

    std::vector<Candidate> candidates;
    for (const auto& id : involved) {
        if (arriving && id == arriving->flight_id) {
            const bool departed = arriving->departure() < state.now();
            candidates.push_back(make_candidate(state, *arriving, -1, arriving->departure_delay, 0, false, !departed));
        } else {
            const auto& f = state.flight(id);
            candidates.push_back(
                make_candidate(state, f.requested, f.route, f.delay, f.version, true, !state.en_route(f)));
        }
    }

    std::map<CellBucket, int> base_occ, cap;
    auto capacity_of = [&](const CellBucket& cb) {
        auto it = cap.find(cb);
        if (it == cap.end()) it = cap.emplace(cb, state.capacity(cb)).first;
        return it->second;
    };
    auto occupancy_of = [&](const CellBucket& cb) {
        auto it = base_occ.find(cb);
        if (it == base_occ.end()) it = base_occ.emplace(cb, state.occupancy(cb.cell, cb.bucket_start)).first;
        return it->second;
    };
    const std::set<CellBucket> conflict_set(conflicts.begin(), conflicts.end());

    auto feasible = [&](const std::vector<int>& choice) {
        std::map<CellBucket, int> delta;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& c = candidates[i];
            if (choice[i] < 0) {
                if (!c.in_state)
                    for (const auto& cb : c.base_cbs) ++delta[cb];
                continue;
            }
            if (c.in_state)
                for (const auto& cb : c.base_cbs) --delta[cb];
            for (const auto& cb : c.options[static_cast<std::size_t>(choice[i])].cbs) ++delta[cb];
        }
        for (const auto& [cb, d] : delta)
            if (d > 0 && occupancy_of(cb) + d > capacity_of(cb)) return false;
        for (const auto& cb : conflict_set) {
            auto it = delta.find(cb);
            if (occupancy_of(cb) + (it == delta.end() ? 0 : it->second) > capacity_of(cb)) return false;
        }
        return true;
    };

    auto score_of = [&](const std::vector<int>& choice, std::size_t cost) {
        Score s;
        s.cost = cost;
        s.choice = choice;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (choice[i] < 0) continue;
            ++s.changed;
            s.ranks.push_back(candidates[i].rank);
            s.ids.push_back(candidates[i].id);
        }
        std::sort(s.ranks.rbegin(), s.ranks.rend());
        return s;
    };

    const std::size_t limit = state.config().max_changed_flights;
    std::optional<Score> best;
    std::vector<int> choice(candidates.size(), -1);

    std::function<void(std::size_t, std::size_t, std::size_t)> search = [&](std::size_t i, std::size_t changed,
                                                                            std::size_t cost) {
        if (best && cost > best->cost) return;
        if (i == candidates.size()) {
            if (!feasible(choice)) return;
            Score s = score_of(choice, cost);
            if (!best || s < *best) best = std::move(s);
            return;
        }
        choice[i] = -1;
        search(i + 1, changed, cost);
        if (changed == limit) return;
        const auto& opts = candidates[i].options;
        for (std::size_t o = 0; o < opts.size(); ++o) {
            choice[i] = static_cast<int>(o);
            search(i + 1, changed + 1, cost + opts[o].cost);
        }
        choice[i] = -1;
    };
    search(0, 0, 0);

    if (!best) return std::nullopt;
    Resolution res;
    res.total_changed_segments = best->cost;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (best->choice[i] < 0) continue;
        const auto& o = candidates[i].options[static_cast<std::size_t>(best->choice[i])];
        res.changes.push_back(FlightChange{candidates[i].id, o.option, o.route, o.total_delay, o.segments, o.cost});
    }
    return res;
}

void apply_resolution(AirspaceState& state, const Resolution& resolution, const FlightPlan* arriving) {
    bool arriving_changed = false;
    for (const auto& ch : resolution.changes) {
        if (arriving && ch.flight_id == arriving->flight_id) {
            state.add_flight(*arriving, ch.route, ch.total_delay, 1);
            arriving_changed = true;
            continue;
        }
        const auto entry = state.flight(ch.flight_id);
        state.remove_flight(ch.flight_id);
        state.add_flight(entry.requested, ch.route, ch.total_delay, entry.version + 1);
    }
    if (arriving && !arriving_changed) state.add_flight(*arriving, -1, arriving->departure_delay, 0);
}

InsertOutcome try_insert(AirspaceState& state, const FlightPlan& plan) {
    plan.validate(state.grid());
    if (state.has_flight(plan.flight_id)) throw ConflictError("flight already present: " + plan.flight_id);

    const auto segments = segment_trajectory(plan, state.grid());
    const auto cls = classify_insert(state, segments);
    if (cls.kind == InsertCase::Case1) {
        state.add_flight(plan, -1, plan.departure_delay, 0);
        return InsertOutcome::accepted();
    }

    auto res = negotiate(state, cls.conflicts, &plan);
    if (!res) {
        InsertOutcome out;
        out.kind = InsertOutcome::Kind::Rejected;
        out.violated = cls.conflicts.front();
        out.reason = std::string(to_string(cls.kind)) + ": no feasible resolution at " + describe(cls.conflicts.front());
        return out;
    }
    apply_resolution(state, *res, &plan);
    if (res->changes.empty()) return InsertOutcome::accepted();

    InsertOutcome out;
    out.kind = InsertOutcome::Kind::Rerouted;
    out.reason = std::string(to_string(cls.kind)) + ": resolved with " + std::to_string(res->total_changed_segments) +
                 " changed segments";
    for (const auto& ch : res->changes) {
        out.changed_flights.push_back(ch.flight_id);
        out.new_plans.push_back(state.flight(ch.flight_id).effective());
    }
    return out;
}

// --- weather --------------------------------------------------------------

std::vector<RuntimeEvent> advance_weather(AirspaceState& state, double to_time) {
    if (to_time < state.now()) throw PreconditionError("cannot move weather time backwards");
    const auto bucket = state.config().bucket_seconds;

    std::vector<std::pair<CellBucket, int>> before;
    for (const auto& [cb, ids] : state.occupancy_index())
        if (static_cast<double>(cb.bucket_start + bucket) > to_time) before.emplace_back(cb, state.capacity(cb));

    std::vector<RuntimeEvent> events;
    for (const auto& s : state.all_storms())
        if (s.active.start > state.now() && s.active.start <= to_time)
            events.push_back({0, EventType::StormRevealed, s.id, "t=" + format_number(s.active.start)});
    state.set_now(to_time);

    std::set<std::string> seen;
    for (const auto& [cb, old_cap] : before) {
        const int new_cap = state.capacity(cb);
        const int occ = state.occupancy(cb.cell, cb.bucket_start);
        if (new_cap >= old_cap || occ <= new_cap) continue;
        const std::string detail = describe(cb) + " capacity " + std::to_string(old_cap) + "->" +
                                   std::to_string(new_cap) + " occupancy " + std::to_string(occ);
        for (const auto& fid : state.occupants(cb)) {
            const auto& f = state.flight(fid);
            for (std::size_t i = 0; i < f.segments.size(); ++i) {
                const auto& seg = f.segments[i];
                if (seg.cell != cb.cell) continue;
                const double b0 = static_cast<double>(cb.bucket_start);
                if (!(seg.entry < b0 + static_cast<double>(bucket) && seg.exit > b0)) continue;
                auto id = AirspaceState::segment_datum_id(fid, f.version, i);
                if (seen.insert(id).second) events.push_back({0, EventType::WeatherChanged, id, detail});
            }
        }
    }
    return events;
}

WeatherReaction react_to_weather(AirspaceState& state, CellIndex cell) {
    WeatherReaction out;
    out.conflicts = state.overloaded(cell);
    if (out.conflicts.empty()) return out;

    out.resolution = negotiate(state, out.conflicts, nullptr);
    if (out.resolution) {
        apply_resolution(state, *out.resolution, nullptr);
        return out;
    }

    for (const auto& cb : out.conflicts) {
        while (state.occupancy(cb.cell, cb.bucket_start) > state.capacity(cb)) {
            auto ids = state.occupants(cb);
            auto victim = std::min_element(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
                const auto& fa = state.flight(a);
                const auto& fb = state.flight(b);
                return std::tuple(state.en_route(fa), fa.requested.priority_rank, a) <
                       std::tuple(state.en_route(fb), fb.requested.priority_rank, b);
            });
            out.withdrawn.emplace_back(*victim, cb);
            state.remove_flight(*victim);
        }
    }
    return out;
}

std::vector<CongestionRecord> predict_congestion(const AirspaceState& state, double now, double horizon, bool full) {
    if (!(horizon > 0)) throw PreconditionError("horizon must be positive");
    const auto bucket = state.config().bucket_seconds;
    const auto first = static_cast<std::int64_t>(std::floor(now / static_cast<double>(bucket))) * bucket;
    const double end = now + horizon;

    std::vector<CongestionRecord> out;
    auto make = [&](const CellBucket& cb) {
        auto ids = state.occupants(cb);
        return CongestionRecord{cb.cell, cb.bucket_start, static_cast<int>(ids.size()), state.capacity(cb),
                                std::move(ids)};
    };

    if (full) {
        const auto cells = state.grid().cells();
        for (auto b = first; static_cast<double>(b) < end; b += bucket)
            for (const auto& c : cells) out.push_back(make({c, b}));
        return out;
    }
    const auto& index = state.occupancy_index();
    for (auto it = index.lower_bound(CellBucket{{INT_MIN, INT_MIN}, first}); it != index.end(); ++it) {
        if (static_cast<double>(it->first.bucket_start) >= end) break;
        out.push_back(make(it->first));
    }
    return out;
}

} // namespace adatm::atm
