#include "adatm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "adatm/error.hpp"
#include "adatm/format.hpp"

namespace adatm::scenario {

std::string SimulationResult::log_text() const {
    std::string out;
    for (const auto& e : events) out += e.line() + "\n";
    return out;
}

namespace {

using atm::InsertOutcome;

constexpr const char* kRequestConcept = "root/atm/request";
constexpr const char* kSegmentConcept = "root/atm/segment";
constexpr double kThresholdSlack = 1e-12;

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

nearness::PlanarBox route_box(const atm::Route& r) {
    nearness::PlanarBox b{r.front().x, r.front().y, r.front().x, r.front().y};
    for (const auto& w : r) {
        b.x0 = std::min(b.x0, w.x);
        b.y0 = std::min(b.y0, w.y);
        b.x1 = std::max(b.x1, w.x);
        b.y1 = std::max(b.y1, w.y);
    }
    return b;
}

std::vector<atm::FlightPlan> insertion_order(const std::vector<atm::FlightPlan>& flights) {
    std::vector<atm::FlightPlan> out = flights;
    std::sort(out.begin(), out.end(), [](const atm::FlightPlan& a, const atm::FlightPlan& b) {
        if (a.departure() != b.departure()) return a.departure() < b.departure();
        return a.flight_id < b.flight_id;
    });
    return out;
}

atm::AirspaceState make_state(const Scenario& s) {
    atm::AirspaceState state(s.grid, s.airspace_config());
    for (const auto& c : s.closures) state.close(c.cell, c.interval);
    return state;
}

class Driver {
public:
    Driver(const Scenario& s, const SimulationOptions& options)
        : s_(s), options_(options), state_(make_state(s)),
          rt_(sched::RuntimeConfig{{900.0, s.grid.cell, 0}, s.grid.cell, {}}), budget_(options.max_steps) {
        if (options.max_steps < 1) throw PreconditionError("max_steps must be >= 1");
        for (const auto& f : s.flights) plans_.emplace(f.flight_id, &f);
        rt_.set_activation_hook([this](sched::Runtime&, const sched::ActivationTask& task, const std::string& id) {
            on_activation(task, id);
        });
    }

    SimulationResult run() {
        for (const auto& r : s_.rules) rt_.add_rule(r);
        for (const auto& sub : s_.subscriptions) rt_.subscribe(sub.to_subscription());
        for (const auto& o : s_.observations)
            rt_.ingest(o.payload, o.kind, kernel::Metadata{o.source, o.observed_at, o.payload.fields().size(), "observation"},
                       o.confidence, o.key, o.id.empty() ? std::nullopt : std::optional<std::string>(o.id));
        drain();

        gate_storms();

        for (const auto& f : insertion_order(s_.flights)) {
            const auto& primary = f.waypoints;
            nearness::NearnessKey key{{f.departure(), f.arrival()}, route_box(primary),
                                      nearness::ConceptPath::parse(kRequestConcept)};
            rt_.ingest(kernel::Payload{{"flight", f.flight_id}, {"request", "insert"}}, kernel::NotionKind::Goal,
                       kernel::Metadata{"plan:" + f.flight_id, 0.0, 2, "flight-request"}, 1.0, key,
                       "req/" + f.flight_id);
        }
        drain();

        for (double t : state_.pending_reveals()) {
            if (!complete_) break;
            rt_.set_now(t);
            for (const auto& e : atm::advance_weather(state_, t)) {
                rt_.emit(e.type, e.datum_id, e.detail);
                if (e.type == EventType::WeatherChanged && rt_.exists(e.datum_id) &&
                    rt_.state(e.datum_id) != sched::LifecycleState::Deleted)
                    rt_.enqueue(e.datum_id, sched::Reason::WeatherChanged);
            }
            drain();
        }

        return {build_report(), rt_.log()};
    }

private:
    void drain() {
        while (complete_ && rt_.pending() > 0) {
            if (budget_ == 0) {
                complete_ = false;
                return;
            }
            const auto st = rt_.run_until_quiescent(budget_);
            stats_.steps += st.steps;
            stats_.alerts += st.alerts;
            stats_.merges += st.merges;
            stats_.deletions += st.deletions;
            budget_ -= st.steps;
        }
    }

    void gate_storms() {
        std::set<std::string> referenced;
        for (const auto& o : s_.observations)
            if (auto storm = o.payload.get("storm")) referenced.insert(*storm);

        std::map<std::string, double> support;
        for (const auto& id : rt_.live_ids()) {
            const auto& d = rt_.datum(id);
            if (auto storm = d.payload.get("storm"))
                support[*storm] = std::max(support[*storm], d.hyperdata.confidence);
        }

        for (const auto& storm : s_.storms) {
            if (referenced.contains(storm.id)) {
                const double c = support[storm.id];
                if (c + kThresholdSlack < options_.storm_threshold) {
                    rt_.emit(EventType::StormGated, storm.id,
                             "confidence=" + format_number(c) + " threshold=" + format_number(options_.storm_threshold));
                    continue;
                }
            }
            state_.add_storm(storm);
            if (storm.active.start <= state_.now())
                rt_.emit(EventType::StormRevealed, storm.id, "t=" + format_number(storm.active.start));
        }
    }

    void on_activation(const sched::ActivationTask& task, const std::string& id) {
        if (!rt_.exists(id)) return;
        const auto& d = rt_.datum(id);
        const auto concept_path = d.key.concept_path.str();
        if (concept_path == kRequestConcept && task.reason == sched::Reason::NewData) {
            if (auto flight = d.payload.get("flight"); flight && !outcomes_.contains(*flight)) handle_request(*flight);
        } else if (concept_path == kSegmentConcept && task.reason == sched::Reason::WeatherChanged) {
            const atm::CellIndex cell{std::stoi(*d.payload.get("col")), std::stoi(*d.payload.get("row"))};
            handle_weather(id, cell);
        }
    }

    std::string plan_detail(const std::string& fid) const {
        const auto& f = state_.flight(fid);
        return "route=" + std::to_string(f.route) + " delay=" + format_number(f.delay) +
               " version=" + std::to_string(f.version);
    }

    void handle_request(const std::string& fid) {
        const auto& plan = *plans_.at(fid);
        InsertOutcome out;
        try {
            out = atm::try_insert(state_, plan);
        } catch (const Error& e) {
            out.kind = InsertOutcome::Kind::Rejected;
            out.reason = e.what();
        }

        switch (out.kind) {
        case InsertOutcome::Kind::Accepted:
            rt_.emit(EventType::InsertAccepted, fid, "Case1");
            outcomes_[fid] = {fid, out.kind, "", {}, -1, 0.0};
            sync_segments(fid);
            break;
        case InsertOutcome::Kind::Rerouted:
            rt_.emit(EventType::InsertRerouted, fid, out.reason + " changed=" + join(out.changed_flights));
            outcomes_[fid] = {fid, out.kind, out.reason, out.changed_flights, -1, 0.0};
            for (const auto& c : out.changed_flights) {
                rt_.emit(EventType::PlanChanged, c, plan_detail(c));
                if (c != fid) outcomes_[c] = {c, InsertOutcome::Kind::Rerouted, "rerouted to admit " + fid, {}, -1, 0.0};
                sync_segments(c);
            }
            if (std::find(out.changed_flights.begin(), out.changed_flights.end(), fid) == out.changed_flights.end())
                sync_segments(fid);
            break;
        case InsertOutcome::Kind::Rejected:
            rt_.emit(EventType::InsertRejected, fid, out.reason);
            outcomes_[fid] = {fid, out.kind, out.reason, {}, -1, 0.0};
            break;
        }
    }

    void handle_weather(const std::string& segment_id, atm::CellIndex cell) {
        const std::string where = "subsector (" + std::to_string(cell.col) + "," + std::to_string(cell.row) + ")";
        if (state_.overloaded(cell).empty()) {
            rt_.emit(EventType::NoConflict, segment_id, where);
            return;
        }
        rt_.emit(EventType::NegotiationStarted, segment_id, where);
        const auto reaction = atm::react_to_weather(state_, cell);
        if (reaction.resolution) {
            std::vector<std::string> changed;
            for (const auto& ch : reaction.resolution->changes) changed.push_back(ch.flight_id);
            rt_.emit(EventType::NegotiationResolved, segment_id,
                     "changed=" + join(changed) +
                         " segments=" + std::to_string(reaction.resolution->total_changed_segments));
            for (const auto& c : changed) {
                rt_.emit(EventType::PlanChanged, c, plan_detail(c));
                outcomes_[c] = {c, InsertOutcome::Kind::Rerouted, "weather at " + where, {c}, -1, 0.0};
                sync_segments(c);
            }
            return;
        }
        rt_.emit(EventType::NegotiationFailed, segment_id, where);
        for (const auto& [fid, cb] : reaction.withdrawn) {
            const auto reason = "withdrawn: capacity drop at " + atm::describe(cb);
            rt_.emit(EventType::FlightWithdrawn, fid, reason);
            outcomes_[fid] = {fid, InsertOutcome::Kind::Rejected, reason, {}, -1, 0.0};
            sync_segments(fid);
        }
    }

    void sync_segments(const std::string& fid) {
        auto& ids = segment_datums_[fid];
        for (const auto& id : ids) rt_.retire(id, "plan superseded");
        ids.clear();
        if (!state_.has_flight(fid)) return;

        const auto& f = state_.flight(fid);
        const auto concept_path = nearness::ConceptPath::parse(kSegmentConcept);
        for (std::size_t i = 0; i < f.segments.size(); ++i) {
            const auto& seg = f.segments[i];
            kernel::Payload payload{{"flight", fid},
                                    {"col", std::to_string(seg.cell.col)},
                                    {"row", std::to_string(seg.cell.row)},
                                    {"entry", format_number(seg.entry)},
                                    {"exit", format_number(seg.exit)},
                                    {"version", std::to_string(seg.plan_version)}};
            auto id = atm::AirspaceState::segment_datum_id(fid, f.version, i);
            nearness::NearnessKey key{{seg.entry, seg.exit}, s_.grid.bounds(seg.cell), concept_path};
            rt_.admit(kernel::encapsulate(id, std::move(payload), kernel::NotionKind::Assumption,
                                          kernel::Metadata{"plan:" + fid, std::max(0.0, rt_.now()), 6, "segment"}, 1.0,
                                          key));
            ids.push_back(std::move(id));
        }
    }

    Report build_report() {
        Report r;
        r.bucket_seconds = s_.bucket_seconds;
        r.horizon_seconds = s_.horizon_seconds;
        r.seed = s_.seed;
        r.sector_cols = s_.grid.sector_cols;
        r.sector_rows = s_.grid.sector_rows;
        r.complete = complete_;
        r.records = atm::predict_congestion(state_, 0.0, s_.horizon_seconds, options_.full);
        for (const auto& [fid, plan] : plans_) {
            FlightOutcome o;
            if (auto it = outcomes_.find(fid); it != outcomes_.end()) {
                o = it->second;
            } else {
                o = {fid, InsertOutcome::Kind::Rejected, "not processed: step budget exhausted", {}, -1, 0.0};
            }
            if (state_.has_flight(fid)) {
                o.route = state_.flight(fid).route;
                o.total_delay = state_.flight(fid).delay;
            } else {
                o.total_delay = plan->departure_delay;
            }
            r.outcomes.push_back(std::move(o));
        }
        r.alerts = rt_.alerts();
        r.stats = stats_;
        r.stats.quiescent = complete_ && rt_.pending() == 0;
        return r;
    }

    const Scenario& s_;
    SimulationOptions options_;
    atm::AirspaceState state_;
    sched::Runtime rt_;
    std::map<std::string, const atm::FlightPlan*> plans_;
    std::map<std::string, std::vector<std::string>> segment_datums_;
    std::map<std::string, FlightOutcome> outcomes_;
    sched::RunStats stats_;
    std::size_t budget_;
    bool complete_ = true;
};

} // namespace

SimulationResult simulate(const Scenario& s, const SimulationOptions& options) {
    s.validate();
    return Driver(s, options).run();
}

Report run_simulation(const Scenario& s, const SimulationOptions& options) { return simulate(s, options).report; }

Report run_oracle(const Scenario& s, bool full, double storm_threshold) {
    s.validate();
    const auto bucket = s.bucket_seconds;
    const double length = static_cast<double>(bucket);

    std::map<std::string, double> support;
    for (const auto& o : s.observations)
        if (auto storm = o.payload.get("storm")) support[*storm] = 1.0 - (1.0 - support[*storm]) * (1.0 - o.confidence);
    std::vector<atm::StormCell> storms;
    for (const auto& st : s.storms) {
        auto it = support.find(st.id);
        if (it == support.end() || it->second + kThresholdSlack >= storm_threshold) storms.push_back(st);
    }

    std::map<atm::CellIndex, atm::Subsector> subsectors;
    for (const auto& c : s.grid.cells())
        subsectors[c] = atm::Subsector{c, s.grid.bounds(c), s.calm_capacity, s.severe_capacity, {}};
    for (const auto& c : s.closures) subsectors[c.cell].closed.push_back(c.interval);

    // (bucket, col, row) -> flights
    std::map<std::tuple<std::int64_t, int, int>, std::set<std::string>> occupancy;
    for (const auto& f : s.flights) {
        for (const auto& seg : atm::segment_trajectory(f, s.grid)) {
            for (auto b = static_cast<std::int64_t>(std::floor(seg.entry / length)) * bucket;
                 static_cast<double>(b) < seg.exit; b += bucket)
                occupancy[{b, seg.cell.col, seg.cell.row}].insert(f.flight_id);
        }
    }

    Report r;
    r.bucket_seconds = bucket;
    r.horizon_seconds = s.horizon_seconds;
    r.seed = s.seed;
    r.sector_cols = s.grid.sector_cols;
    r.sector_rows = s.grid.sector_rows;
    auto record = [&](std::int64_t b, atm::CellIndex c) {
        std::vector<std::string> ids;
        if (auto it = occupancy.find({b, c.col, c.row}); it != occupancy.end()) ids.assign(it->second.begin(), it->second.end());
        const int cap = atm::bucket_capacity(subsectors.at(c), static_cast<double>(b), length, storms);
        r.records.push_back({c, b, static_cast<int>(ids.size()), cap, std::move(ids)});
    };
    if (full) {
        for (std::int64_t b = 0; static_cast<double>(b) < s.horizon_seconds; b += bucket)
            for (const auto& c : s.grid.cells()) record(b, c);
    } else {
        for (const auto& [k, ids] : occupancy) {
            const auto [b, col, row] = k;
            if (b >= 0 && static_cast<double>(b) < s.horizon_seconds) record(b, {col, row});
        }
    }

    std::vector<const atm::FlightPlan*> sorted;
    for (const auto& f : s.flights) sorted.push_back(&f);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->flight_id < b->flight_id; });
    for (const auto* f : sorted)
        r.outcomes.push_back({f->flight_id, InsertOutcome::Kind::Accepted, "", {}, -1, f->departure_delay});
    return r;
}

} // namespace adatm::scenario
